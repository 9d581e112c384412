//! Finite-state continuous-time chains: the exact oracle for invariant
//! measures, kernels, spectra and potentials.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::numerics::linalg::{expm, stationary_vector};
use crate::process::{ProcessModel, Step, TestFunction};
use crate::rng::{path_rng, SimRng};

#[derive(Debug, Clone)]
pub struct FiniteChain {
    q: DMatrix<f64>,
    labels: Vec<String>,
    pi: DVector<f64>,
    exit_rates: Vec<f64>,
    jump_cdf: Vec<Vec<(usize, f64)>>,
    pi_cdf: Vec<f64>,
}

/// Builds a chain from its generator, solving for the invariant vector.
pub fn finite_chain_build(q: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<FiniteChain> {
    FiniteChain::new(q, labels)
}

impl FiniteChain {
    pub fn new(q: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = q.nrows();
        if n == 0 || q.ncols() != n {
            return Err(Error::InvalidParameter(
                "generator must be a non-empty square matrix".into(),
            ));
        }
        let scale = q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let v = q[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("Q[{i},{j}] is not finite")));
                }
                if i != j && v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "negative off-diagonal rate Q[{i},{j}] = {v}"
                    )));
                }
                row += v;
            }
            if row.abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!("row {i} sums to {row}, not 0")));
            }
        }
        let labels = match labels {
            Some(l) if l.len() == n => l,
            Some(l) => return Err(Error::InvalidParameter(format!("{} labels for {n} states", l.len()))),
            None => (0..n).map(|i| format!("s{i}")).collect(),
        };
        let pi = stationary_vector(&q)?;
        let exit_rates: Vec<f64> = (0..n).map(|i| -q[(i, i)]).collect();
        let jump_cdf = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                let mut v = Vec::new();
                for j in (0..n).filter(|&j| j != i && q[(i, j)] > 0.0) {
                    acc += q[(i, j)] / exit_rates[i];
                    v.push((j, acc));
                }
                v
            })
            .collect();
        let pi_cdf = pi
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(FiniteChain {
            q,
            labels,
            pi,
            exit_rates,
            jump_cdf,
            pi_cdf,
        })
    }

    /// Parses whitespace-separated rows; blank lines and `#` comments skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| Error::Config(format!("bad matrix entry {t:?}: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config("generator file is not square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]), None)
    }

    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    /// Exact kernel `e^{tQ}`.
    pub fn kernel(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("t must be ≥ 0, got {t}")));
        }
        Ok(expm(&(&self.q * t)))
    }

    /// Time-reversed chain `Q* = D_π^{-1} Qᵀ D_π`.
    pub fn dual(&self) -> Result<FiniteChain> {
        let n = self.len();
        let q = DMatrix::from_fn(n, n, |i, j| self.pi[j] * self.q[(j, i)] / self.pi[i]);
        FiniteChain::new(zero_row_sums(q), Some(self.labels.clone()))
    }

    pub fn is_reversible(&self, tol: f64) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| (self.pi[i] * self.q[(i, j)] - self.pi[j] * self.q[(j, i)]).abs() <= tol))
    }

    /// Draws a state from the invariant law.
    pub fn sample_pi(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.random::<f64>() * self.pi_cdf[self.len() - 1];
        self.pi_cdf.partition_point(|&c| c < u).min(self.len() - 1)
    }

    /// Draws from a discrete law given as a probability vector.
    pub fn sample_from(law: &[f64], rng: &mut SimRng) -> usize {
        let total: f64 = law.iter().sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (i, p) in law.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        law.iter().rposition(|&p| p > 0.0).unwrap_or(law.len() - 1)
    }

    /// Product chain of two independent copies; state `(i, j)` ↦ `i·n + j`.
    pub fn independent_pair(&self) -> Result<FiniteChain> {
        let n = self.len();
        let mut q = DMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let s = i * n + j;
                for k in 0..n {
                    q[(s, k * n + j)] += self.q[(i, k)];
                    q[(s, i * n + k)] += self.q[(j, k)];
                }
            }
        }
        FiniteChain::new(zero_row_sums(q), None)
    }

    /// Samples a Markov bridge from `a` at time 0 to `b` at time `t` by
    /// uniformization; returns the interior jump events `(time, state)`.
    pub fn sample_bridge(&self, a: usize, b: usize, t: f64, rng: &mut SimRng) -> Result<Vec<(f64, usize)>> {
        let n = self.len();
        let lambda = self.exit_rates.iter().cloned().fold(0.0, f64::max);
        if lambda == 0.0 || t == 0.0 {
            return if a == b {
                Ok(Vec::new())
            } else {
                Err(Error::InvalidParameter("bridge endpoints unreachable".into()))
            };
        }
        let p = DMatrix::identity(n, n) + &self.q / lambda;
        let total = self.kernel(t)?[(a, b)];
        if total <= 0.0 {
            return Err(Error::InvalidParameter("bridge endpoints unreachable".into()));
        }
        let lt = lambda * t;
        let max_n = (lt + 12.0 * lt.sqrt() + 60.0).ceil() as usize;
        // cols[k] = P^k e_b
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(max_n + 1);
        let mut e_b = DVector::zeros(n);
        e_b[b] = 1.0;
        cols.push(e_b);
        let u: f64 = rng.random::<f64>() * total;
        let mut log_pois = -lt;
        let mut acc = 0.0;
        let mut count = max_n;
        for k in 0..=max_n {
            if k > 0 {
                let next = &p * &cols[k - 1];
                cols.push(next);
                log_pois += lt.ln() - (k as f64).ln();
            }
            acc += log_pois.exp() * cols[k][a];
            if acc >= u {
                count = k;
                break;
            }
        }
        let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * t).collect();
        times.sort_by(f64::total_cmp);
        let mut events = Vec::new();
        let mut cur = a;
        for (i, &s) in times.iter().enumerate() {
            let remaining = count - i - 1;
            let weights: Vec<f64> = (0..n).map(|j| p[(cur, j)] * cols[remaining][j]).collect();
            let next = Self::sample_from(&weights, rng);
            if next != cur {
                events.push((s, next));
            }
            cur = next;
        }
        debug_assert_eq!(cur, b);
        Ok(events)
    }
}

fn zero_row_sums(mut q: DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    for i in 0..n {
        q[(i, i)] = 0.0;
        let s: f64 = (0..n).map(|j| q[(i, j)]).sum();
        q[(i, i)] = -s;
    }
    q
}

/// Exact kernel `e^{tQ}` of a chain.
pub fn finite_chain_kernel(chain: &FiniteChain, t: f64) -> Result<DMatrix<f64>> {
    chain.kernel(t)
}

impl ProcessModel for FiniteChain {
    type State = usize;

    fn description(&self) -> String {
        format!("finite chain on {} states", self.len())
    }

    fn next_event(&self, x: &usize, max_dt: f64, rng: &mut SimRng) -> Result<Step<usize>> {
        let rate = self.exit_rates[*x];
        if rate <= 0.0 {
            return Ok(Step {
                dt: max_dt,
                state: *x,
                jump: false,
            });
        }
        let e: f64 = Exp1.sample(rng);
        let hold = e / rate;
        if hold >= max_dt {
            return Ok(Step {
                dt: max_dt,
                state: *x,
                jump: false,
            });
        }
        let row = &self.jump_cdf[*x];
        let u: f64 = rng.random::<f64>() * row.last().map(|r| r.1).unwrap_or(1.0);
        let target = row
            .iter()
            .find(|(_, c)| u < *c)
            .or(row.last())
            .map(|r| r.0)
            .unwrap_or(*x);
        Ok(Step {
            dt: hold,
            state: target,
            jump: true,
        })
    }

    fn exact_kernel(&self, x: &usize, t: f64) -> Option<Vec<(usize, f64)>> {
        let k = self.kernel(t).ok()?;
        Some((0..self.len()).map(|j| (j, k[(*x, j)])).collect())
    }

    fn discrete_state_space(&self) -> bool {
        true
    }

    fn sample_bridge(&self, x: &usize, y: &usize, t: f64, rng: &mut SimRng) -> Option<Result<Vec<(f64, usize)>>> {
        Some(FiniteChain::sample_bridge(self, *x, *y, t, rng))
    }

    fn generator_apply(&self, f: &TestFunction<usize>, x: &usize) -> Result<f64> {
        let fx = f.eval(x);
        Ok((0..self.len())
            .filter(|&j| j != *x)
            .map(|j| self.q[(*x, j)] * (f.eval(&j) - fx))
            .sum())
    }
}

/// Random irreducible chain with rates in `[lo, hi]`; every pair of states is
/// connected in both directions so irreducibility is guaranteed.
pub fn random_chain(n: usize, seed: u64, lo: f64, hi: f64) -> Result<FiniteChain> {
    let mut rng = path_rng(seed, 0);
    let q = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            lo + (hi - lo) * rng.random::<f64>()
        }
    });
    FiniteChain::new(zero_row_sums(q), None)
}

/// Random reversible chain: symmetric conductances over a random invariant law.
pub fn random_reversible_chain(n: usize, seed: u64, lo: f64, hi: f64) -> Result<FiniteChain> {
    let mut rng = path_rng(seed, 1);
    let weights: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = lo + (hi - lo) * rng.random::<f64>();
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    // q_ij = c_ij / (n π_i) keeps rates O(1) and gives π_i q_ij = π_j q_ji.
    let q = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { c[(i, j)] / (n as f64 * pi[i]) });
    FiniteChain::new(zero_row_sums(q), None)
}

/// Birth–death chain with the given up and down rates.
pub fn birth_death_chain(up: &[f64], down: &[f64]) -> Result<FiniteChain> {
    let n = up.len() + 1;
    if down.len() != up.len() {
        return Err(Error::InvalidParameter(
            "up and down rate vectors differ in length".into(),
        ));
    }
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        q[(i, i + 1)] = up[i];
        q[(i + 1, i)] = down[i];
    }
    FiniteChain::new(zero_row_sums(q), None)
}

/// Directed cycle with uniform rate.
pub fn cycle_chain(n: usize, rate: f64) -> Result<FiniteChain> {
    let q = DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { rate } else { 0.0 });
    FiniteChain::new(zero_row_sums(q), None)
}

pub fn two_state(a: f64, b: f64) -> Result<FiniteChain> {
    FiniteChain::new(DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{simulate_trajectory, State};
    use approx::assert_relative_eq;

    #[test]
    fn two_state_invariant_laws() {
        let c = two_state(1.0, 1.0).unwrap();
        assert_relative_eq!(c.pi()[0], 0.5, epsilon = 1e-14);
        let c = two_state(1.0, 2.0).unwrap();
        assert_relative_eq!(c.pi()[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(c.pi()[1], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn validation_errors() {
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -0.5]);
        assert!(FiniteChain::new(bad, None).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]);
        assert!(FiniteChain::new(neg, None).is_err());
        let reducible = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            FiniteChain::new(reducible, None),
            Err(Error::Reducible { .. })
        ));
    }

    #[test]
    fn birth_death_detailed_balance() {
        let c = birth_death_chain(&[1.0, 2.0, 0.5, 3.0], &[2.0, 1.0, 1.5, 0.7]).unwrap();
        let q = c.generator();
        for i in 0..c.len() - 1 {
            assert_relative_eq!(
                c.pi()[i] * q[(i, i + 1)],
                c.pi()[i + 1] * q[(i + 1, i)],
                epsilon = 1e-14
            );
        }
        // product form: π_{i+1}/π_i = up_i / down_i
        assert_relative_eq!(c.pi()[1] / c.pi()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kernel_at_zero_and_closed_form() {
        let c = two_state(1.0, 1.0).unwrap();
        let k0 = c.kernel(0.0).unwrap();
        assert_eq!(k0, DMatrix::identity(2, 2));
        let k1 = c.kernel(1.0).unwrap();
        let e = (-2.0f64).exp();
        assert_relative_eq!(k1[(0, 0)], (1.0 + e) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(k1[(1, 0)], (1.0 - e) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn chapman_kolmogorov_random_chain() {
        let c = random_chain(6, 3, 0.1, 2.0).unwrap();
        let lhs = c.kernel(0.7).unwrap() * c.kernel(1.9).unwrap();
        let rhs = c.kernel(2.6).unwrap();
        assert!((lhs - rhs).abs().max() < 1e-10);
        for r in c.kernel(3.3).unwrap().row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn text_loader() {
        let c = FiniteChain::from_text("# two states\n-1 1\n2 -2\n").unwrap();
        assert_relative_eq!(c.pi()[0], 2.0 / 3.0, epsilon = 1e-14);
        assert!(FiniteChain::from_text("-1 1\n2\n").is_err());
    }

    #[test]
    fn dual_shares_pi_and_spectrum() {
        let c = random_chain(5, 9, 0.2, 1.5).unwrap();
        let d = c.dual().unwrap();
        assert!((c.pi() - d.pi()).abs().max() < 1e-10);
        let mut a = crate::numerics::linalg::eigenvalues(c.generator());
        let mut b = crate::numerics::linalg::eigenvalues(d.generator());
        let key = |z: &nalgebra::Complex<f64>| {
            (z.re * 1e8).round() as i64 * 1_000_000_007 + (z.im.abs() * 1e8).round() as i64
        };
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.re - y.re).abs() < 1e-10 && (x.im.abs() - y.im.abs()).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_horizon_trajectory() {
        let c = two_state(1.0, 1.0).unwrap();
        let tr = simulate_trajectory(&c, &0, 0.0, 5).unwrap();
        assert_eq!(tr.events, vec![(0.0, 0)]);
    }

    #[test]
    fn occupation_of_symmetric_chain() {
        // Fraction of time in state 0 over a horizon of 10⁴ is 1/2 ± 3σ,
        // with σ from the exact asymptotic variance 2·π0π1/(gap·T) = 1/(4T).
        let c = two_state(1.0, 1.0).unwrap();
        let horizon = 1e4;
        let tr = simulate_trajectory(&c, &0, horizon, 17).unwrap();
        let mut time0 = 0.0;
        for (i, (t, x)) in tr.events.iter().enumerate() {
            let end = tr.events.get(i + 1).map(|e| e.0).unwrap_or(horizon);
            if *x == 0 {
                time0 += end - t;
            }
        }
        let frac = time0 / horizon;
        let sigma = (1.0 / (4.0 * horizon)).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * sigma, "frac {frac}");
        assert!(tr.is_valid());
        assert_eq!(tr.events[0].1.coordinate(), 0.0);
    }

    #[test]
    fn bridge_hits_endpoint_and_has_right_law() {
        // Midpoint of a bridge 0 → 1 over [0, 2] has law ∝ P_1(0,·)P_1(·,1).
        let c = random_chain(3, 21, 0.3, 1.5).unwrap();
        let k = c.kernel(1.0).unwrap();
        let w: Vec<f64> = (0..3).map(|j| k[(0, j)] * k[(j, 1)]).collect();
        let tot: f64 = w.iter().sum();
        let n = 40_000;
        let mut counts = [0usize; 3];
        for i in 0..n {
            let mut rng = path_rng(99, i);
            let ev = c.sample_bridge(0, 1, 2.0, &mut rng).unwrap();
            assert_eq!(ev.last().map(|e| e.1).unwrap_or(0), 1);
            let mid = ev.iter().rfind(|e| e.0 <= 1.0).map(|e| e.1).unwrap_or(0);
            counts[mid] += 1;
        }
        for j in 0..3 {
            let p = w[j] / tot;
            let phat = counts[j] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((phat - p).abs() < 4.0 * se, "state {j}: {phat} vs {p}");
        }
    }
}
