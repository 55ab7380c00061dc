//! Closed-form step-size thresholds and orbit bounds.

use std::fmt;
use std::io::{self, Write};

use crate::distributions::beta_kernel_max;
use crate::dynamics::{BurnPolicy, MarketInstance};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub const DEFAULT_GRID_N: usize = 1_000_000;
pub const MIN_GRID_N: usize = 10_000;
const EDGE_MARGIN: f64 = 1e-9;
const LIMIT_BAND: f64 = 1e-8;
const CHUNK: usize = 4096;
const GOLDEN_ITER: usize = 200;

/// Largest `η` for which orbits of the full rule stay strictly inside `(0, 1)`:
/// `min{1/(w(1−λ*)), 1/λ*}`.
pub fn liveness_threshold(inst: &MarketInstance) -> f64 {
    let s = inst.lambda_star();
    (1.0 / (inst.w() * (1.0 - s))).min(1.0 / s)
}

/// The band `[max{0, λ* − wη/4}, min{λ* + η/4, 1}]` that orbits of the full
/// rule never leave once inside.
pub fn attracting_range(inst: &MarketInstance, eta: f64) -> Result<(f64, f64)> {
    check_eta(eta)?;
    let s = inst.lambda_star();
    Ok(((s - inst.w() * eta / 4.0).max(0.0), (s + eta / 4.0).min(1.0)))
}

/// Minimum of the convergence objective over a grid, with its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMinimum {
    pub lambda: f64,
    pub value: f64,
}

impl GridMinimum {
    fn better(self, other: GridMinimum) -> GridMinimum {
        if other.value < self.value || (other.value == self.value && other.lambda < self.lambda) {
            other
        } else {
            self
        }
    }
}

struct Objective<'a> {
    inst: &'a MarketInstance,
    star: f64,
    k_limit: f64,
}

impl<'a> Objective<'a> {
    fn new(inst: &'a MarketInstance) -> Result<Self> {
        let star = inst.lambda_star();
        Ok(Objective {
            inst,
            star,
            k_limit: inst.delta_slope(star)?,
        })
    }

    /// `(λ* + λ) / (λ²(1−λ)|K(λ)|)` with `K(λ) = Δ(λ)/(λ − λ*)`.
    fn eval(&self, l: f64) -> f64 {
        let k = if (l - self.star).abs() <= LIMIT_BAND {
            self.k_limit
        } else {
            self.inst.delta_ref(l) / (l - self.star)
        };
        let v = (self.star + l) / (l * l * (1.0 - l) * k.abs());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Largest `η` for which every orbit of the full rule converges to `λ*`,
/// estimated as a grid infimum refined by golden-section search.
pub fn convergence_threshold(inst: &MarketInstance, grid_n: usize, exec: Execution) -> Result<f64> {
    Ok(convergence_infimum(inst, grid_n, true, exec)?.value)
}

/// Infimum of the convergence objective on the grid
/// `λ_i = lo + (hi − lo)·i/n`, `i = 0..=n`, over `[1e−9, 1 − 1e−9]`.
///
/// Grids nest under refinement (`n` divides `m` means every node of the
/// `n`-grid is a node of the `m`-grid), so the unrefined value is
/// nonincreasing along such sequences.
pub fn convergence_infimum(inst: &MarketInstance, grid_n: usize, refine: bool, exec: Execution) -> Result<GridMinimum> {
    if grid_n < MIN_GRID_N {
        return Err(Error::argument(format!(
            "grid_n must be at least {MIN_GRID_N}, got {grid_n}"
        )));
    }
    let obj = Objective::new(inst)?;
    let (lo, hi) = (EDGE_MARGIN, 1.0 - EDGE_MARGIN);
    let node = |i: usize| lo + (hi - lo) * (i as f64) / (grid_n as f64);
    let n_chunks = (grid_n + 1).div_ceil(CHUNK);
    let chunk_min = |c: usize| {
        let mut best = GridMinimum {
            lambda: f64::NAN,
            value: f64::INFINITY,
        };
        let mut best_i = usize::MAX;
        for i in c * CHUNK..((c + 1) * CHUNK).min(grid_n + 1) {
            let v = obj.eval(node(i));
            if v < best.value {
                best = GridMinimum {
                    lambda: node(i),
                    value: v,
                };
                best_i = i;
            }
        }
        (best, best_i)
    };
    let mut best = GridMinimum {
        lambda: f64::NAN,
        value: f64::INFINITY,
    };
    let mut best_i = usize::MAX;
    for (m, i) in exec::map_range(exec, n_chunks, chunk_min) {
        if i != usize::MAX && (m.value < best.value || (m.value == best.value && i < best_i)) {
            best = m;
            best_i = i;
        }
    }
    if best_i == usize::MAX {
        return Err(Error::Internal(
            "convergence objective is infinite on the whole grid".into(),
        ));
    }
    if refine {
        let a = node(best_i.saturating_sub(1));
        let b = node((best_i + 1).min(grid_n));
        best = best.better(golden_min(|x| obj.eval(x), a, b));
    }
    Ok(best)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> GridMinimum {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITER {
        if b - a <= f64::EPSILON * b.abs() {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        GridMinimum { lambda: c, value: fc }
    } else {
        GridMinimum { lambda: d, value: fd }
    }
}

/// Bound `η(1+w)/4 · (max f + w·k·max g)` on `|Δ(λ_t)|` for orbit points in
/// `(p, q) = (λ* − wη/4, λ* + η/4)`, for Beta tolerance laws.
pub fn deviation_bound(inst: &MarketInstance, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let (Some((a, b)), Some((c, d))) = (inst.users().beta_shapes(), inst.miners().beta_shapes()) else {
        return Err(Error::precondition("requires Beta/Beta tolerances"));
    };
    let k = match *inst.burn() {
        BurnPolicy::None => 1.0,
        BurnPolicy::Constant(k) => k,
        BurnPolicy::Sampled { .. } => return Err(Error::precondition("requires a deterministic burn fraction")),
    };
    let w = inst.w();
    let s = inst.lambda_star();
    let (p, q) = (s - w * eta / 4.0, s + eta / 4.0);
    if p <= 0.0 {
        return Err(Error::precondition(format!(
            "range clamp engaged: lower end lambda*-w*eta/4={p} <= 0"
        )));
    }
    if q >= 1.0 {
        return Err(Error::precondition(format!(
            "range clamp engaged: upper end lambda*+eta/4={q} >= 1"
        )));
    }
    let f_max = beta_kernel_max(a, b, p, q)?.value * (-inst.users().beta_ln_norm().unwrap_or(0.0)).exp();
    let g_max = beta_kernel_max(c, d, k * p, k * q)?.value * (-inst.miners().beta_ln_norm().unwrap_or(0.0)).exp();
    Ok(eta * (1.0 + w) / 4.0 * (f_max + w * k * g_max))
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::argument(format!("eta must be positive, got {eta}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Deviation {
    Present(f64),
    Absent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub lambda_star: f64,
    pub liveness_eta_max: f64,
    pub convergence_eta_max: f64,
    pub attracting_lo: f64,
    pub attracting_hi: f64,
    pub deviation: Deviation,
    pub eta_used: f64,
}

impl ThresholdReport {
    pub fn liveness_exceeded(&self) -> bool {
        self.eta_used >= self.liveness_eta_max
    }

    pub fn convergence_exceeded(&self) -> bool {
        self.eta_used >= self.convergence_eta_max
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        let (dev, note) = match &self.deviation {
            Deviation::Present(v) => (v.to_string(), String::new()),
            Deviation::Absent(why) => (String::new(), format!("absent: {why}")),
        };
        vec![
            ("lambda_star", self.lambda_star.to_string()),
            ("liveness_eta_max", self.liveness_eta_max.to_string()),
            ("convergence_eta_max", self.convergence_eta_max.to_string()),
            ("attracting_lo", self.attracting_lo.to_string()),
            ("attracting_hi", self.attracting_hi.to_string()),
            ("deviation_bound", dev),
            ("deviation_note", note),
            ("eta_used", self.eta_used.to_string()),
            ("liveness_exceeded", self.liveness_exceeded().to_string()),
            ("convergence_exceeded", self.convergence_exceeded().to_string()),
        ]
    }

    /// One `key=value` line per field.
    pub fn write_record<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, v) in self.fields() {
            writeln!(out, "{k}={v}")?;
        }
        Ok(())
    }

    /// Header plus one row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let fields = self.fields();
        let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
        let row: Vec<String> = fields.into_iter().map(|(_, v)| csv_cell(v)).collect();
        writeln!(out, "{}", header.join(","))?;
        writeln!(out, "{}", row.join(","))
    }
}

fn csv_cell(v: String) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v
    }
}

impl fmt::Display for ThresholdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.fields() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// All thresholds and bounds for `inst` at step size `eta`.
pub fn report(inst: &MarketInstance, eta: f64, grid_n: usize, exec: Execution) -> Result<ThresholdReport> {
    let (attracting_lo, attracting_hi) = attracting_range(inst, eta)?;
    let deviation = match deviation_bound(inst, eta) {
        Ok(v) => Deviation::Present(v),
        Err(Error::Precondition(why)) => Deviation::Absent(why),
        Err(e) => return Err(e),
    };
    Ok(ThresholdReport {
        lambda_star: inst.lambda_star(),
        liveness_eta_max: liveness_threshold(inst),
        convergence_eta_max: convergence_threshold(inst, grid_n, exec)?,
        attracting_lo,
        attracting_hi,
        deviation,
        eta_used: eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ToleranceDistribution;
    use crate::dynamics::{MevSequence, UpdateRule};
    use crate::testkit::{random_beta_market, random_market};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uu(w: f64) -> MarketInstance {
        let u = ToleranceDistribution::uniform(0.0, 1.0).unwrap();
        MarketInstance::new(u.clone(), u, w).unwrap()
    }

    fn bb(a: f64, b: f64, w: f64) -> MarketInstance {
        let d = ToleranceDistribution::beta(a, b).unwrap();
        MarketInstance::new(d.clone(), d, w).unwrap()
    }

    #[test]
    fn liveness_examples() {
        assert_eq!(liveness_threshold(&uu(1.0)), 2.0);
        assert!((liveness_threshold(&uu(3.0)) - 4.0 / 9.0).abs() < 1e-15);
        let n = MarketInstance::new(
            ToleranceDistribution::truncated_normal(0.4, 0.01).unwrap(),
            ToleranceDistribution::truncated_normal(0.5, 0.01).unwrap(),
            1.6,
        )
        .unwrap();
        let s = n.lambda_star();
        assert_eq!(liveness_threshold(&n), 1.0 / (1.6 * (1.0 - s)));
        assert!((liveness_threshold(&n) - 1.0954).abs() < 1e-3);
    }

    #[test]
    fn convergence_uniform_matches_closed_form_minimum() {
        // minimize (0.5+λ)/(2λ²(1−λ)) via the root of its log-derivative
        let dlog = |l: f64| 1.0 / (0.5 + l) - 2.0 / l + 1.0 / (1.0 - l);
        let (mut lo, mut hi) = (0.3, 0.9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dlog(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let l = 0.5 * (lo + hi);
        let exact = (0.5 + l) / (2.0 * l * l * (1.0 - l));
        let got = convergence_infimum(&uu(1.0), DEFAULT_GRID_N, true, Execution::default()).unwrap();
        assert!((got.value - exact).abs() < 1e-12 * exact, "{} vs {exact}", got.value);
        assert!((got.lambda - 0.59).abs() < 0.01);
        assert!((got.value - 3.82).abs() < 0.01);

        let beta = convergence_threshold(&bb(1.0, 1.0, 1.0), DEFAULT_GRID_N, Execution::Sequential).unwrap();
        assert!((beta - got.value).abs() < 1e-12 * beta);
    }

    #[test]
    fn convergence_grid_is_nonincreasing_under_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..10 {
            let m = random_market(&mut rng, BurnPolicy::None);
            let mut prev = f64::INFINITY;
            for n in [10_000, 20_000, 40_000, 80_000] {
                let v = convergence_infimum(&m, n, false, Execution::Sequential).unwrap().value;
                assert!(v > 0.0);
                assert!(v <= prev, "{m}: n={n} gave {v} > {prev}");
                prev = v;
            }
            let refined = convergence_threshold(&m, 80_000, Execution::Sequential).unwrap();
            assert!(refined <= prev);
        }
    }

    #[test]
    fn convergence_modes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let m = random_market(&mut rng, BurnPolicy::None);
        let a = convergence_infimum(&m, 100_000, true, Execution::Sequential).unwrap();
        let b = convergence_infimum(&m, 100_000, true, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn convergence_rejects_coarse_grid() {
        assert!(convergence_threshold(&uu(1.0), 999, Execution::Sequential).is_err());
    }

    #[test]
    fn attracting_examples() {
        assert_eq!(attracting_range(&uu(1.0), 1.0).unwrap(), (0.25, 0.75));
        assert_eq!(attracting_range(&uu(1.0), 4.0).unwrap(), (0.0, 1.0));
        let (lo, hi) = attracting_range(&uu(3.0), 0.2).unwrap();
        assert!((lo - 0.10).abs() < 1e-15 && (hi - 0.30).abs() < 1e-15);
        assert!(attracting_range(&uu(1.0), 0.0).is_err());
    }

    #[test]
    fn deviation_examples() {
        assert!((deviation_bound(&bb(1.0, 1.0, 1.0), 0.4).unwrap() - 0.4).abs() < 1e-12);
        let eta = 0.2;
        assert!((deviation_bound(&bb(2.0, 2.0, 1.0), eta).unwrap() - 1.5 * eta).abs() < 1e-12);
        let err = deviation_bound(&bb(2.0, 2.0, 1.0), 2.5).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref s) if s.contains("range clamp engaged")));
        assert!(matches!(deviation_bound(&uu(1.0), 0.4), Err(Error::Precondition(_))));
    }

    #[test]
    fn report_examples() {
        let r = report(&uu(1.0), 1.0, 100_000, Execution::default()).unwrap();
        assert_eq!(r.lambda_star, 0.5);
        assert_eq!(r.liveness_eta_max, 2.0);
        assert!((r.convergence_eta_max - 3.82).abs() < 0.01);
        assert_eq!((r.attracting_lo, r.attracting_hi), (0.25, 0.75));
        assert!(matches!(r.deviation, Deviation::Absent(_)));
        assert!(!r.liveness_exceeded());

        let r = report(&bb(1.0, 1.0, 1.0), 0.4, 100_000, Execution::default()).unwrap();
        assert!(matches!(r.deviation, Deviation::Present(v) if (v - 0.4).abs() < 1e-12));

        let r = report(&uu(1.0), 10.0, 100_000, Execution::default()).unwrap();
        assert_eq!((r.attracting_lo, r.attracting_hi), (0.0, 1.0));
        assert!(r.liveness_exceeded());

        let mut kv = Vec::new();
        r.write_record(&mut kv).unwrap();
        let kv = String::from_utf8(kv).unwrap();
        assert!(kv.contains("lambda_star=0.5\n"));
        assert!(kv.contains("deviation_note=absent: requires Beta/Beta tolerances\n"));
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }

    #[test]
    fn liveness_keeps_orbits_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..20 {
            let m = random_market(&mut rng, BurnPolicy::None);
            let eta = 0.99 * liveness_threshold(&m);
            for _ in 0..10 {
                let l0 = rng.gen_range(1e-6..1.0 - 1e-6);
                let tr = m
                    .simulate(UpdateRule::Full, l0, eta, &MevSequence::default(), 2000)
                    .unwrap();
                assert!(tr.lambdas.iter().all(|&l| l > 0.0 && l < 1.0), "{m} eta={eta} l0={l0}");
            }
        }
    }

    #[test]
    fn attracting_band_is_forward_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        for _ in 0..500 {
            let m = random_market(&mut rng, BurnPolicy::None);
            let eta = rng.gen_range(0.05..6.0);
            let (lo, hi) = attracting_range(&m, eta).unwrap();
            let mut l = rng.gen_range(0.0..1.0);
            let mut inside = false;
            for _ in 0..300 {
                l = m.step(UpdateRule::Full, l, eta, 1.0);
                let now = (lo..=hi).contains(&l);
                assert!(!inside || now, "{m} eta={eta}: left [{lo}, {hi}] at {l}");
                inside |= now;
            }
        }
    }

    #[test]
    fn deviation_bound_holds_on_orbits() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let mut checked = 0;
        while checked < 30 {
            let m = random_beta_market(&mut rng);
            let eta = rng.gen_range(0.05..2.0);
            let Ok(bound) = deviation_bound(&m, eta) else { continue };
            let s = m.lambda_star();
            let (p, q) = (s - m.w() * eta / 4.0, s + eta / 4.0);
            let tr = m
                .simulate(
                    UpdateRule::Full,
                    rng.gen_range(p..q),
                    eta,
                    &MevSequence::default(),
                    5000,
                )
                .unwrap();
            for (&l, &d) in tr.lambdas.iter().zip(&tr.deltas) {
                if l > p && l < q {
                    assert!(d.abs() <= bound, "{m} eta={eta}: |Δ({l})|={} > {bound}", d.abs());
                }
            }
            checked += 1;
        }
    }
}
