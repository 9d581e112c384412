use std::collections::BTreeMap;

use rand::Rng;

use super::{CouplingRun, GluingMode, GluingOptions, LadderEntry, Phase};
use crate::error::{Error, Result};
use crate::models::FiniteChain;
use crate::process::{advance, simulate_path, ProcessModel, State, Trajectory};
use crate::rng::{path_rng, SimRng};

/// `Σ min(p_i, q_i)`.
pub fn overlap(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a.min(*b)).sum()
}

/// Draws an index pair from the maximal coupling of two discrete laws on a
/// common index set (both normalized to unit mass first). Returns
/// `(i, j, equal)`; when `equal`, `i == j` was drawn from the overlap.
pub fn maximal_coupling(p: &[f64], q: &[f64], rng: &mut SimRng) -> (usize, usize, bool) {
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    let p: Vec<f64> = p.iter().map(|v| v / sp).collect();
    let q: Vec<f64> = q.iter().map(|v| v / sq).collect();
    let common: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a.min(*b)).collect();
    let w: f64 = common.iter().sum();
    if rng.random::<f64>() < w {
        let i = FiniteChain::sample_from(&common, rng);
        return (i, i, true);
    }
    let rp: Vec<f64> = p.iter().zip(&common).map(|(a, m)| (a - m).max(0.0)).collect();
    let rq: Vec<f64> = q.iter().zip(&common).map(|(b, m)| (b - m).max(0.0)).collect();
    // With w < 1 both residuals carry mass 1 − w > 0.
    let i = FiniteChain::sample_from(&rp, rng);
    let j = FiniteChain::sample_from(&rq, rng);
    (i, j, false)
}

/// Which representation of the transition laws a model supports.
pub fn gluing_mode<M: ProcessModel + ?Sized>(model: &M, x: &M::State) -> GluingMode {
    if model.discrete_state_space() && model.exact_kernel(x, 0.0).is_some() {
        GluingMode::Exact
    } else if model
        .binned_kernel(x, 0.0, &[f64::NEG_INFINITY, f64::INFINITY])
        .is_some()
    {
        GluingMode::Binned
    } else {
        GluingMode::Empirical
    }
}

/// One gluing block: paths of both components over `[0, t1]` and `[0, t2]`
/// whose endpoints are maximally coupled.
pub(crate) struct Glued<S> {
    pub events1: Vec<(f64, S)>,
    pub events2: Vec<(f64, S)>,
    pub end1: S,
    pub end2: S,
    pub coupled: bool,
    pub grid_error: f64,
}

pub(crate) struct Streams<'a> {
    pub one: &'a mut SimRng,
    pub two: &'a mut SimRng,
    pub glue: &'a mut SimRng,
}

pub(crate) fn glue<M: ProcessModel + ?Sized>(
    model: &M,
    z1: &M::State,
    z2: &M::State,
    t1: f64,
    t2: f64,
    opts: &GluingOptions,
    rng: Streams<'_>,
) -> Result<Glued<M::State>> {
    if !(t1 > 0.0 && t2 > 0.0) || !t1.is_finite() || !t2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gluing horizons must be positive, got ({t1}, {t2})"
        )));
    }
    match gluing_mode(model, z1) {
        GluingMode::Exact => glue_exact(model, z1, z2, t1, t2, rng),
        GluingMode::Binned => glue_binned(model, z1, z2, t1, t2, opts, rng),
        GluingMode::Empirical => glue_empirical(model, z1, z2, t1, t2, opts, rng.glue),
    }
}

fn interior<M: ProcessModel + ?Sized>(
    model: &M,
    from: &M::State,
    to: &M::State,
    t: f64,
    rng: &mut SimRng,
) -> Result<Vec<(f64, M::State)>> {
    match model.sample_bridge(from, to, t, rng) {
        Some(events) => events,
        None if from == to => Ok(Vec::new()),
        None => Ok(vec![(t, to.clone())]),
    }
}

fn glue_exact<M: ProcessModel + ?Sized>(
    model: &M,
    z1: &M::State,
    z2: &M::State,
    t1: f64,
    t2: f64,
    rng: Streams<'_>,
) -> Result<Glued<M::State>> {
    let unavailable = || Error::Unsupported(format!("{} has no exact kernel", model.description()));
    let law1 = model.exact_kernel(z1, t1).ok_or_else(unavailable)?;
    let law2 = model.exact_kernel(z2, t2).ok_or_else(unavailable)?;
    // Align both laws on the union of their atoms.
    let mut atoms: Vec<M::State> = law1.iter().map(|a| a.0.clone()).collect();
    for (s, _) in &law2 {
        if !atoms.contains(s) {
            atoms.push(s.clone());
        }
    }
    let weights = |law: &[(M::State, f64)]| -> Vec<f64> {
        atoms
            .iter()
            .map(|s| law.iter().filter(|a| a.0 == *s).map(|a| a.1.max(0.0)).sum())
            .collect()
    };
    let (p, q) = (weights(&law1), weights(&law2));
    let (i, j, coupled) = maximal_coupling(&p, &q, rng.glue);
    let (end1, end2) = (atoms[i].clone(), atoms[j].clone());
    Ok(Glued {
        events1: interior(model, z1, &end1, t1, rng.one)?,
        events2: interior(model, z2, &end2, t2, rng.two)?,
        end1,
        end2,
        coupled,
        grid_error: 0.0,
    })
}

const PILOT: usize = 64;
const MAX_BINS: usize = 20_000;
const MAX_REJECTIONS: usize = 4096;
const SUB_BINS: usize = 256;

fn glue_binned<M: ProcessModel + ?Sized>(
    model: &M,
    z1: &M::State,
    z2: &M::State,
    t1: f64,
    t2: f64,
    opts: &GluingOptions,
    rng: Streams<'_>,
) -> Result<Glued<M::State>> {
    // Adaptive range from a pilot sample of both laws.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (z, t) in [(z1, t1), (z2, t2)] {
        for _ in 0..PILOT {
            let y = advance(model, z, t, rng.glue)?.coordinate();
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    let spread = (hi - lo).max(opts.grid_width);
    let (lo, hi) = (lo - spread, hi + spread);
    let width = opts.grid_width.max((hi - lo) / MAX_BINS as f64);
    let n = ((hi - lo) / width).ceil() as usize;
    let mut edges = Vec::with_capacity(n + 3);
    edges.push(f64::NEG_INFINITY);
    edges.extend((0..=n).map(|k| lo + k as f64 * width));
    edges.push(f64::INFINITY);
    let unavailable = || Error::Unsupported(format!("{} has no binned kernel", model.description()));
    let p = model.binned_kernel(z1, t1, &edges).ok_or_else(unavailable)?;
    let q = model.binned_kernel(z2, t2, &edges).ok_or_else(unavailable)?;
    let (i, j, coupled) = maximal_coupling(&p, &q, rng.glue);
    // Exact conditional draw by rejection; bins too light for that are
    // refined and sampled uniformly inside the chosen sub-bin.
    let in_bin = |z: &M::State, t: f64, b: usize, rng: &mut SimRng| -> Result<M::State> {
        for _ in 0..MAX_REJECTIONS {
            let y = advance(model, z, t, rng)?;
            let c = y.coordinate();
            if c >= edges[b] && c < edges[b + 1] {
                return Ok(y);
            }
        }
        let (a, w) = match (edges[b].is_finite(), edges[b + 1].is_finite()) {
            (true, true) => (edges[b], edges[b + 1] - edges[b]),
            (false, _) => (edges[b + 1] - spread, spread),
            (_, false) => (edges[b], spread),
        };
        let sub: Vec<f64> = (0..=SUB_BINS).map(|k| a + w * k as f64 / SUB_BINS as f64).collect();
        let mass = model.binned_kernel(z, t, &sub).ok_or_else(unavailable)?;
        let k = if mass.iter().sum::<f64>() > 0.0 {
            FiniteChain::sample_from(&mass, rng)
        } else {
            rng.random_range(0..SUB_BINS)
        };
        let c = sub[k] + (sub[k + 1] - sub[k]) * rng.random::<f64>();
        M::State::from_coordinate(c).ok_or_else(|| Error::Unsupported("binned gluing needs real-valued states".into()))
    };
    let end1 = in_bin(z1, t1, i, rng.glue)?;
    let end2 = if coupled {
        end1.clone()
    } else {
        in_bin(z2, t2, j, rng.glue)?
    };
    Ok(Glued {
        events1: interior(model, z1, &end1, t1, rng.one)?,
        events2: interior(model, z2, &end2, t2, rng.two)?,
        end1,
        end2,
        coupled,
        grid_error: width,
    })
}

fn glue_empirical<M: ProcessModel + ?Sized>(
    model: &M,
    z1: &M::State,
    z2: &M::State,
    t1: f64,
    t2: f64,
    opts: &GluingOptions,
    rng: &mut SimRng,
) -> Result<Glued<M::State>> {
    let m = opts.candidates.max(1);
    let mut paths = [Vec::with_capacity(m), Vec::with_capacity(m)];
    for (side, (z, t)) in [(z1, t1), (z2, t2)].into_iter().enumerate() {
        for _ in 0..m {
            let tr = simulate_path(model, z, t, rng)?;
            let end = tr.position(model, t);
            paths[side].push((tr, end));
        }
    }
    let mut coords: Vec<f64> = paths.iter().flatten().map(|p| p.1.coordinate()).collect();
    coords.sort_by(f64::total_cmp);
    let lo = coords[0];
    // Freedman–Diaconis width, floored at the configured grid.
    let iqr = coords[coords.len() * 3 / 4] - coords[coords.len() / 4];
    let width = opts.grid_width.max(2.0 * iqr / (coords.len() as f64).cbrt());
    // bin -> candidate indices of each side
    let mut bins: BTreeMap<i64, [Vec<usize>; 2]> = BTreeMap::new();
    for (side, list) in paths.iter().enumerate() {
        for (k, (_, end)) in list.iter().enumerate() {
            let b = ((end.coordinate() - lo) / width).floor() as i64;
            bins.entry(b).or_default()[side].push(k);
        }
    }
    let members: Vec<&[Vec<usize>; 2]> = bins.values().collect();
    let p: Vec<f64> = members.iter().map(|b| b[0].len() as f64).collect();
    let q: Vec<f64> = members.iter().map(|b| b[1].len() as f64).collect();
    let (i, j, coupled) = maximal_coupling(&p, &q, rng);
    let pick = |list: &Vec<usize>, rng: &mut SimRng| list[rng.random_range(0..list.len())];
    let k1 = pick(&members[i][0], rng);
    let k2 = pick(&members[j][1], rng);
    let strip = |tr: &Trajectory<M::State>| -> Vec<(f64, M::State)> { tr.events[1..].to_vec() };
    let end1 = paths[0][k1].1.clone();
    let mut events1 = strip(&paths[0][k1].0);
    let mut events2 = strip(&paths[1][k2].0);
    let end2 = if coupled { end1.clone() } else { paths[1][k2].1.clone() };
    for (events, end, t) in [(&mut events1, &end1, t1), (&mut events2, &end2, t2)] {
        if events.last().map(|e| e.0 >= t).unwrap_or(false) {
            events.pop();
        }
        events.push((t, end.clone()));
    }
    Ok(Glued {
        events1,
        events2,
        end1,
        end2,
        coupled,
        grid_error: width,
    })
}

/// Maximal coupling of `P_T(z1, ·)` and `P_T(z2, ·)`.
pub fn gluing_coupling<M: ProcessModel + ?Sized>(
    model: &M,
    z1: &M::State,
    z2: &M::State,
    t: f64,
    seed: u64,
    opts: &GluingOptions,
) -> Result<CouplingRun<M::State>> {
    extended_gluing_coupling(model, z1, z2, t, t, seed, opts)
}

/// Maximal coupling of `P_{t1}(z1, ·)` and `P_{t2}(z2, ·)`; component 1 runs
/// on `[0, t1]` and component 2 on `[0, t2]`.
pub fn extended_gluing_coupling<M: ProcessModel + ?Sized>(
    model: &M,
    z1: &M::State,
    z2: &M::State,
    t1: f64,
    t2: f64,
    seed: u64,
    opts: &GluingOptions,
) -> Result<CouplingRun<M::State>> {
    let mut traj1 = Trajectory::new(z1.clone(), t1);
    let mut traj2 = Trajectory::new(z2.clone(), t2);
    if z1 == z2 && t1 == t2 {
        let tr = simulate_path(model, z1, t1, &mut path_rng(seed, 0))?;
        return Ok(CouplingRun {
            traj2: tr.clone(),
            traj1: tr,
            coupled_at: Some(0.0),
            endpoints_equal: true,
            theta_ladder: vec![LadderEntry {
                time: 0.0,
                phase: Phase::Gluing,
            }],
            attempts: 0,
            coupled_on_attempt: None,
            grid_error: 0.0,
            seed,
            diagnostic: None,
        });
    }
    let (mut r1, mut r2, mut rg) = (path_rng(seed, 0), path_rng(seed, 1), path_rng(seed, 2));
    let g = glue(
        model,
        z1,
        z2,
        t1,
        t2,
        opts,
        Streams {
            one: &mut r1,
            two: &mut r2,
            glue: &mut rg,
        },
    )?;
    traj1.events.extend(g.events1);
    traj2.events.extend(g.events2);
    Ok(CouplingRun {
        traj1,
        traj2,
        coupled_at: (g.coupled && t1 == t2).then_some(t1),
        endpoints_equal: g.coupled,
        theta_ladder: vec![LadderEntry {
            time: 0.0,
            phase: Phase::Gluing,
        }],
        attempts: 1,
        coupled_on_attempt: g.coupled.then_some(1),
        grid_error: g.grid_error,
        seed,
        diagnostic: None,
    })
}
