use super::gluing::{glue, Streams};
use super::{CouplingRun, GluingOptions, LadderEntry, Phase};
use crate::error::{Error, Result};
use crate::process::{simulate_path, ProcessModel, TestFunction, Trajectory};
use crate::rng::{path_rng, SimRng};

/// Tuning of [`switching_coupling`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwitchingOptions {
    /// Spacing of the checks for joint entry into `K′` between events;
    /// `None` uses `T/8`.
    pub monitor_dt: Option<f64>,
    pub gluing: GluingOptions,
}

fn append<S: Clone>(traj: &mut Trajectory<S>, offset: f64, events: &[(f64, S)], until: f64) {
    for (s, x) in events {
        let t = offset + s;
        if *s > 0.0 && t <= until && traj.events.last().map(|e| t > e.0).unwrap_or(true) {
            traj.events.push((t, x.clone()));
        }
    }
}

/// First time in `[0, dt]` at which the two chunk paths satisfy `pred`,
/// checked at every event of either path and at `dt`.
fn first_joint<M: ProcessModel + ?Sized>(
    model: &M,
    a: &Trajectory<M::State>,
    b: &Trajectory<M::State>,
    dt: f64,
    pred: &dyn Fn(&M::State, &M::State) -> bool,
) -> Option<f64> {
    let mut times: Vec<f64> = a
        .events
        .iter()
        .chain(&b.events)
        .map(|e| e.0)
        .filter(|&s| s > 0.0)
        .collect();
    times.push(dt);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .find(|&s| pred(&a.position(model, s), &b.position(model, s)))
}

/// Switching coupling started from the pair `(x1, x2)`.
///
/// Components move independently until both are in `K′ = {φ ≤ c}`; then one
/// gluing block of length `t_glue` is attempted, and the cycle repeats until
/// the components meet or `horizon` is reached. Components that meet stay
/// together.
#[allow(clippy::too_many_arguments)]
pub fn switching_coupling_from<M: ProcessModel + ?Sized>(
    model: &M,
    phi: &TestFunction<M::State>,
    c: f64,
    t_glue: f64,
    x1: &M::State,
    x2: &M::State,
    horizon: f64,
    seed: u64,
    opts: &SwitchingOptions,
) -> Result<CouplingRun<M::State>> {
    if !(t_glue > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gluing time must be positive, got {t_glue}"
        )));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be ≥ 0, got {horizon}")));
    }
    let monitor = opts.monitor_dt.unwrap_or(t_glue / 8.0);
    if !(monitor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "monitor step must be positive, got {monitor}"
        )));
    }
    let in_k = |x: &M::State| phi.eval(x) <= c;
    let (mut r1, mut r2, mut rg) = (path_rng(seed, 0), path_rng(seed, 1), path_rng(seed, 2));
    let mut traj1 = Trajectory::new(x1.clone(), horizon);
    let mut traj2 = Trajectory::new(x2.clone(), horizon);
    let (mut z1, mut z2) = (x1.clone(), x2.clone());
    let mut t = 0.0;
    let mut ladder = vec![LadderEntry {
        time: 0.0,
        phase: Phase::Simple,
    }];
    let mut attempts = 0;
    let mut coupled_at = (z1 == z2).then_some(0.0);
    let mut coupled_on_attempt = coupled_at.map(|_| 0);
    let mut grid_error: f64 = 0.0;
    let mut entered = false;

    while coupled_at.is_none() && t < horizon {
        if in_k(&z1) && in_k(&z2) && t + t_glue <= horizon {
            entered = true;
            match ladder.last_mut() {
                Some(last) if last.time == t => last.phase = Phase::Gluing,
                _ => ladder.push(LadderEntry {
                    time: t,
                    phase: Phase::Gluing,
                }),
            }
            attempts += 1;
            let g = glue(
                model,
                &z1,
                &z2,
                t_glue,
                t_glue,
                &opts.gluing,
                Streams {
                    one: &mut r1,
                    two: &mut r2,
                    glue: &mut rg,
                },
            )?;
            grid_error = grid_error.max(g.grid_error);
            append(&mut traj1, t, &g.events1, horizon);
            append(&mut traj2, t, &g.events2, horizon);
            t += t_glue;
            z1 = g.end1;
            z2 = g.end2;
            if g.coupled {
                coupled_at = Some(t);
                coupled_on_attempt = Some(attempts);
            }
            continue;
        }
        if ladder.last().map(|e| e.phase) != Some(Phase::Simple) {
            ladder.push(LadderEntry {
                time: t,
                phase: Phase::Simple,
            });
        }
        let dt = monitor.min(horizon - t);
        let can_glue = t + t_glue <= horizon;
        let a = simulate_path(model, &z1, dt, &mut r1)?;
        let b = simulate_path(model, &z2, dt, &mut r2)?;
        // Meeting, or joint entry into K′, ends the chunk early.
        let stop = first_joint(model, &a, &b, dt, &|u, v| u == v || (can_glue && in_k(u) && in_k(v)));
        let s = stop.unwrap_or(dt);
        append(&mut traj1, t, &a.events, t + s);
        append(&mut traj2, t, &b.events, t + s);
        z1 = a.position(model, s);
        z2 = b.position(model, s);
        t = if s >= dt { t + dt } else { t + s };
        if z1 == z2 {
            coupled_at = Some(t);
            coupled_on_attempt = Some(attempts);
        }
    }

    if let Some(tc) = coupled_at {
        if tc < horizon {
            let rest = simulate_path(model, &z1, horizon - tc, &mut r1)?;
            append(&mut traj1, tc, &rest.events, horizon);
            append(&mut traj2, tc, &rest.events, horizon);
        }
    }
    let diagnostic =
        (coupled_at.is_none() && !entered).then(|| "the pair never entered K′×K′ before the horizon".to_string());
    Ok(CouplingRun {
        traj1,
        traj2,
        coupled_at,
        endpoints_equal: coupled_at.is_some(),
        theta_ladder: ladder,
        attempts,
        coupled_on_attempt,
        grid_error,
        seed,
        diagnostic,
    })
}

/// Switching coupling of the process from `x` with a partner drawn from the
/// invariant law by `pi_sampler`.
#[allow(clippy::too_many_arguments)]
pub fn switching_coupling<M, F>(
    model: &M,
    phi: &TestFunction<M::State>,
    c: f64,
    t_glue: f64,
    x: &M::State,
    pi_sampler: &F,
    horizon: f64,
    seed: u64,
    opts: &SwitchingOptions,
) -> Result<CouplingRun<M::State>>
where
    M: ProcessModel + ?Sized,
    F: Fn(&mut SimRng) -> M::State + ?Sized,
{
    let partner = pi_sampler(&mut path_rng(seed, 3));
    switching_coupling_from(model, phi, c, t_glue, x, &partner, horizon, seed, opts)
}
