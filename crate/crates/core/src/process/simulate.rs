use super::{ProcessModel, Region, State, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss_legendre;
use crate::rng::{path_rng, SimRng};
use std::sync::OnceLock;

fn check_finite<S: State>(x: &S, time: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Explosion { time })
    }
}

/// Simulates a path on `[0, horizon]` from a fresh stream derived from `seed`.
pub fn simulate_trajectory<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &M::State,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory<M::State>> {
    simulate_path(model, x0, horizon, &mut path_rng(seed, 0))
}

/// Simulates a path on `[0, horizon]` drawing from `rng`.
pub fn simulate_path<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &M::State,
    horizon: f64,
    rng: &mut SimRng,
) -> Result<Trajectory<M::State>> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be ≥ 0, got {horizon}")));
    }
    check_finite(x0, 0.0)?;
    let mut traj = Trajectory::new(x0.clone(), horizon);
    let mut x = x0.clone();
    let mut t = 0.0;
    while t < horizon {
        let step = model.next_event(&x, horizon - t, rng)?;
        let t_next = if step.dt >= horizon - t { horizon } else { t + step.dt };
        check_finite(&step.state, t_next)?;
        if step.jump && t_next > t && t_next <= horizon {
            traj.events.push((t_next, step.state.clone()));
        }
        x = step.state;
        t = t_next;
    }
    Ok(traj)
}

/// State at time `t` started from `x`.
pub fn advance<M: ProcessModel + ?Sized>(model: &M, x: &M::State, t: f64, rng: &mut SimRng) -> Result<M::State> {
    if let Some(y) = model.sample_kernel(x, t, rng) {
        let y = y?;
        check_finite(&y, t)?;
        return Ok(y);
    }
    let mut x = x.clone();
    let mut s = 0.0;
    while s < t {
        let step = model.next_event(&x, t - s, rng)?;
        s = if step.dt >= t - s { t } else { s + step.dt };
        check_finite(&step.state, s)?;
        x = step.state;
    }
    Ok(x)
}

fn crossing_time(a: f64, b: f64, dt: f64, region: &Region) -> Option<f64> {
    let Region::Intervals(iv) = region else {
        return None;
    };
    iv.iter()
        .filter_map(|&(lo, hi)| {
            if a < lo && b >= lo {
                Some((lo - a) / (b - a) * dt)
            } else if a > hi && b <= hi {
                Some((a - hi) / (a - b) * dt)
            } else {
                None
            }
        })
        .min_by(f64::total_cmp)
}

/// First entry time into `region` before `horizon`, simulating forward
/// from `x0`. `None` means the path was censored at the horizon.
pub fn first_entry<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &M::State,
    region: &Region,
    horizon: f64,
    rng: &mut SimRng,
) -> Result<Option<f64>> {
    let mut x = x0.clone();
    let mut t = 0.0;
    loop {
        if x.in_region(region) {
            return Ok(Some(t));
        }
        if t >= horizon {
            return Ok(None);
        }
        let step = model.next_event(&x, horizon - t, rng)?;
        let dt = step.dt.min(horizon - t);
        if let Some(s) = model.flow_entry(&x, dt, region) {
            return Ok(Some(t + s));
        }
        if model.continuous_paths() {
            if let Some(s) = crossing_time(x.coordinate(), step.state.coordinate(), dt, region) {
                return Ok(Some(t + s));
            }
        }
        t += dt;
        check_finite(&step.state, t)?;
        x = step.state;
    }
}

/// First time `≥ from` at which a recorded trajectory is in `region`.
pub fn trajectory_entry<M: ProcessModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::State>,
    region: &Region,
    from: f64,
) -> Option<f64> {
    let start = traj.event_index_at(from);
    for i in start..traj.events.len() {
        let (t_i, x_i) = &traj.events[i];
        let seg_start = t_i.max(from);
        let seg_end = traj.events.get(i + 1).map(|e| e.0).unwrap_or(traj.horizon);
        let x = if seg_start > *t_i {
            model.flow(x_i, seg_start - t_i)
        } else {
            x_i.clone()
        };
        if let Some(s) = model.flow_entry(&x, seg_end - seg_start, region) {
            return Some(seg_start + s);
        }
        if model.continuous_paths() {
            if let Some((_, next)) = traj.events.get(i + 1) {
                if let Some(s) = crossing_time(x.coordinate(), next.coordinate(), seg_end - seg_start, region) {
                    return Some(seg_start + s);
                }
            }
        }
    }
    let last = traj.position(model, traj.horizon);
    last.in_region(region).then_some(traj.horizon)
}

fn gl5() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(5))
}

/// `∫_0^{t_end} g(X_s) ds` along a recorded trajectory, following the flow
/// inside each segment.
pub fn path_integral<M: ProcessModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::State>,
    g: &dyn Fn(&M::State) -> f64,
    t_end: f64,
) -> f64 {
    const MAX_PIECE: f64 = 0.25;
    let (nodes, weights) = gl5();
    let mut total = 0.0;
    for (i, (t_i, x_i)) in traj.events.iter().enumerate() {
        if *t_i >= t_end {
            break;
        }
        let seg_end = traj.events.get(i + 1).map(|e| e.0).unwrap_or(traj.horizon).min(t_end);
        let len = seg_end - t_i;
        if len <= 0.0 {
            continue;
        }
        if model.flow(x_i, len) == *x_i {
            total += g(x_i) * len;
            continue;
        }
        let pieces = (len / MAX_PIECE).ceil().max(1.0) as usize;
        let h = len / pieces as f64;
        for k in 0..pieces {
            let a = k as f64 * h;
            let mut s = 0.0;
            for (z, w) in nodes.iter().zip(weights) {
                let u = a + 0.5 * h * (z + 1.0);
                s += w * g(&model.flow(x_i, u));
            }
            total += 0.5 * h * s;
        }
    }
    total
}
