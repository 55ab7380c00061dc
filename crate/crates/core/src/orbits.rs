//! Periodic orbits, Sharkovsky ordering, chaos witnesses and bifurcation scans.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};

use crate::distributions::ToleranceDistribution;
use crate::dynamics::{MarketInstance, UpdateRule};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub const DEFAULT_PERIOD_TOL: f64 = 1e-10;
pub const SCAN_EDGE: f64 = 1e-6;
pub const MARGINAL_BAND: f64 = 1e-8;

/// `k`-fold composition of the update map at constant intensity.
pub fn iterate_k(inst: &MarketInstance, rule: UpdateRule, eta: f64, k: usize, lambda: f64) -> f64 {
    let kk = inst.burn().reference_k();
    (0..k).fold(lambda, |l, _| inst.step(rule, l, eta, kk))
}

/// Grid size used when none is given: `200·2^⌈log₂ k⌉`.
pub fn default_grid_n(k: usize) -> usize {
    200 * k.max(1).next_power_of_two()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

impl Stability {
    fn classify(multiplier: f64) -> Self {
        let m = multiplier.abs();
        if (m - 1.0).abs() <= MARGINAL_BAND {
            Stability::Marginal
        } else if m < 1.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::Stable => "true",
            Stability::Marginal => "marginal",
            Stability::Unstable => "false",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPoint {
    pub x: f64,
    pub least_period: usize,
    /// Product of map derivatives along the cycle.
    pub multiplier: f64,
    pub stability: Stability,
}

/// Fixed points of `h^k` in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodReport {
    pub k: usize,
    pub points: Vec<PeriodicPoint>,
    /// Grid points where `|h^k(x) − x| < tol` with no sign change nearby;
    /// possible tangential fixed points the scan cannot bracket.
    pub tangential_suspects: Vec<f64>,
}

impl PeriodReport {
    pub fn fixed_points(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn with_least_period(&self, d: usize) -> Vec<&PeriodicPoint> {
        self.points.iter().filter(|p| p.least_period == d).collect()
    }

    pub fn has_least_period(&self, d: usize) -> bool {
        self.points.iter().any(|p| p.least_period == d)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(out, "k,fixed_point,least_period,stable")?;
        }
        for p in &self.points {
            writeln!(out, "{},{},{},{}", self.k, p.x, p.least_period, p.stability.label())?;
        }
        Ok(())
    }
}

/// Roots of `h^k(λ) − λ` on a `grid_n`-point grid over `(1e−6, 1 − 1e−6)`,
/// bracketed by sign changes and bisected to machine precision.
pub fn find_periodic_points(
    inst: &MarketInstance,
    rule: UpdateRule,
    eta: f64,
    k: usize,
    grid_n: usize,
    tol: f64,
    exec: Execution,
) -> Result<PeriodReport> {
    if k == 0 {
        return Err(Error::argument("period k must be at least 1"));
    }
    if grid_n < 1000 {
        return Err(Error::argument(format!("grid_n must be at least 1000, got {grid_n}")));
    }
    if !(tol > 0.0) {
        return Err(Error::argument(format!("tolerance must be positive, got {tol}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::argument(format!("eta must be positive, got {eta}")));
    }
    let g = |x: f64| iterate_k(inst, rule, eta, k, x) - x;
    let (lo, hi) = (SCAN_EDGE, 1.0 - SCAN_EDGE);
    let xs: Vec<f64> = (0..grid_n)
        .map(|i| lo + (hi - lo) * (i as f64) / ((grid_n - 1) as f64))
        .collect();
    let gs = exec::map(exec, &xs, |&x| g(x));

    let mut brackets = Vec::new();
    let mut roots = Vec::new();
    for i in 0..grid_n {
        if gs[i] == 0.0 {
            roots.push(xs[i]);
        } else if i + 1 < grid_n && gs[i + 1] != 0.0 && (gs[i] < 0.0) != (gs[i + 1] < 0.0) {
            brackets.push(i);
        }
    }
    roots.extend(exec::map(exec, &brackets, |&i| bisect(&g, xs[i], xs[i + 1], gs[i])));

    let mut tangential_suspects = Vec::new();
    for i in 0..grid_n {
        let near_bracket = |j: usize| brackets.binary_search(&j).is_ok();
        if gs[i] != 0.0 && gs[i].abs() < tol && !near_bracket(i) && !(i > 0 && near_bracket(i - 1)) {
            tangential_suspects.push(xs[i]);
        }
    }

    roots.sort_by(f64::total_cmp);
    let mut unique: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match unique.last() {
            Some(&prev) if r - prev < 10.0 * tol => {}
            _ => unique.push(r),
        }
    }

    let points = exec::map(exec, &unique, |&x| classify(inst, rule, eta, k, x, tol));
    Ok(PeriodReport {
        k,
        points: points.into_iter().collect::<Result<_>>()?,
        tangential_suspects,
    })
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    let lo_neg = g_lo < 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

fn classify(inst: &MarketInstance, rule: UpdateRule, eta: f64, k: usize, x: f64, tol: f64) -> Result<PeriodicPoint> {
    let least_period = (1..=k)
        .filter(|&d| k.is_multiple_of(d))
        .find(|&d| (iterate_k(inst, rule, eta, d, x) - x).abs() <= 10.0 * tol)
        .unwrap_or(k);
    let mut multiplier = 1.0;
    let mut y = x;
    for _ in 0..least_period {
        multiplier *= inst.step_derivative(rule, y, eta)?;
        y = iterate_k(inst, rule, eta, 1, y);
    }
    Ok(PeriodicPoint {
        x,
        least_period,
        multiplier,
        stability: Stability::classify(multiplier),
    })
}

/// Position of `n` in the Sharkovsky order, as a lexicographic key.
///
/// Writing `n = 2^s·q` with `q` odd, the order lists odd `q > 1` by
/// ascending `s` then ascending `q`, followed by the powers of two in
/// descending order, ending at 1.
pub fn sharkovsky_rank(n: u64) -> (u8, i64, u64) {
    assert!(n > 0, "Sharkovsky order is defined on positive integers");
    let s = n.trailing_zeros() as i64;
    let q = n >> s;
    if q > 1 {
        (0, s, q)
    } else {
        (1, -s, 0)
    }
}

/// Whether a point of least period `m` forces one of least period `l`.
pub fn sharkovsky_implies(m: u64, l: u64) -> bool {
    sharkovsky_rank(m) <= sharkovsky_rank(l)
}

/// The forcing predicate of period `m`.
pub fn sharkovsky_implied(m: u64) -> impl Fn(u64) -> bool {
    move |l| sharkovsky_implies(m, l)
}

/// Compares two periods in the Sharkovsky order, greatest (3) first.
pub fn sharkovsky_cmp(m: u64, l: u64) -> Ordering {
    sharkovsky_rank(m).cmp(&sharkovsky_rank(l))
}

const RHO_LEVELS: i32 = 60;
const MIN_WIDTH: f64 = 1e-14;

/// A period-3-forcing configuration `λ3 ≤ λ0 < λ1 = a < λ2` of the full
/// rule for users and miners sharing the tolerance law
/// `ρ·U[0, a] + (1−ρ)·U[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosWitness {
    pub a: f64,
    pub b: f64,
    /// Tolerance mass `ρ` placed on `[0, a]`; zero gives `F = G = U[a, b]`.
    pub mass_below_a: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub eta: f64,
    pub w: f64,
}

/// Outcome of re-evaluating a witness through its market instance.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCheck {
    pub residual: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub ordered: bool,
}

impl WitnessCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.residual <= tol && self.ordered
    }
}

impl ChaosWitness {
    pub fn tolerance_law(&self) -> Result<ToleranceDistribution> {
        if self.mass_below_a == 0.0 {
            ToleranceDistribution::uniform(self.a, self.b)
        } else {
            let mut knots = vec![(0.0, 0.0), (self.a, self.mass_below_a), (self.b, 1.0)];
            if self.b < 1.0 {
                knots.push((1.0, 1.0));
            }
            ToleranceDistribution::piecewise_linear(&knots)
        }
    }

    pub fn instance(&self) -> Result<MarketInstance> {
        let law = self.tolerance_law()?;
        MarketInstance::new(law.clone(), law, self.w)
    }

    /// Evaluates the four orbit points through the instance's CDFs.
    pub fn recheck(&self) -> Result<WitnessCheck> {
        let inst = self.instance()?;
        let h = |x: f64| inst.step(UpdateRule::Full, x, self.eta, 1.0);
        let l1 = h(self.lambda0);
        let l2 = h(self.a);
        let l3 = h(l2);
        Ok(WitnessCheck {
            residual: (l1 - self.a).abs(),
            lambda1: l1,
            lambda2: l2,
            lambda3: l3,
            ordered: l3 <= self.lambda0 && self.lambda0 < self.a && self.a < l2,
        })
    }
}

impl fmt::Display for ChaosWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eta={}", self.eta)?;
        writeln!(f, "w={}", self.w)?;
        writeln!(f, "a={}", self.a)?;
        writeln!(f, "b={}", self.b)?;
        writeln!(f, "mass_below_a={}", self.mass_below_a)?;
        writeln!(f, "lambda0={}", self.lambda0)?;
        writeln!(f, "lambda1={}", self.lambda1)?;
        writeln!(f, "lambda2={}", self.lambda2)?;
        writeln!(f, "lambda3={}", self.lambda3)
    }
}

/// Searches for a [`ChaosWitness`] at intensity `eta` and target `w`.
///
/// `a` starts at `a0` and is halved until `a + ηa(1−a) < 1`. The plain
/// uniform law (`ρ = 0`) is tried first with `b_j = a + (b_0 − a)·2^−j`,
/// `b_0 = min(1, a + 0.5)`. When that runs out, mass
/// `ρ = (1 − 2^−i)/(1 + w)` is moved onto `[0, a]`, which shortens both
/// upward steps without touching the downward one.
pub fn chaos_witness(eta: f64, w: f64, a0: f64, search_steps: usize) -> Result<ChaosWitness> {
    if !(eta > 0.0 && eta.is_finite()) || !(w > 0.0 && w.is_finite()) {
        return Err(Error::argument(format!(
            "eta and w must be positive, got eta={eta}, w={w}"
        )));
    }
    if !(a0 > 0.0 && a0 < 1.0) {
        return Err(Error::argument(format!("a0 must lie in (0,1), got {a0}")));
    }
    if search_steps == 0 {
        return Err(Error::argument("search_steps must be positive"));
    }
    let u = |x: f64| x * (1.0 - x);
    let mut a = a0;
    while a + eta * u(a) >= 1.0 {
        a *= 0.5;
    }
    let b0 = (a + 0.5).min(1.0);
    let mut last = String::new();
    for i in 0..RHO_LEVELS {
        let rho = if i == 0 {
            0.0
        } else {
            (1.0 - 0.5f64.powi(i)) / (1.0 + w)
        };
        let da = 1.0 - (1.0 + w) * rho;
        for j in 0..search_steps {
            let b = a + (b0 - a) * 0.5f64.powi(j as i32);
            if b - a <= MIN_WIDTH {
                break;
            }
            let delta = |l: f64| {
                if l < a {
                    1.0 - (1.0 + w) * rho * l / a
                } else if l < b {
                    da + (-w - da) * (l - a) / (b - a)
                } else {
                    -w
                }
            };
            let h = |l: f64| (l + eta * u(l) * delta(l)).clamp(0.0, 1.0);
            let (mut lo, mut hi) = (0.0f64, a);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if h(mid) < a {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let l0 = if (h(lo) - a).abs() <= (h(hi) - a).abs() { lo } else { hi };
            let l2 = h(a);
            let l3 = h(l2);
            if l3 <= l0 && l0 < a && a < l2 {
                return Ok(ChaosWitness {
                    a,
                    b,
                    mass_below_a: rho,
                    lambda0: l0,
                    lambda1: a,
                    lambda2: l2,
                    lambda3: l3,
                    eta,
                    w,
                });
            }
            last = format!("a={a}, b={b}, rho={rho}, lambda0={l0}, lambda2={l2}, lambda3={l3}");
        }
    }
    Err(Error::SearchExhausted(format!(
        "no period-3 configuration found; last state {last}"
    )))
}

/// Parameter axis of a bifurcation scan.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanFamily {
    /// Varies `η` over `[lo, hi]` for a fixed instance.
    Eta { inst: MarketInstance, lo: f64, hi: f64 },
    /// Varies the half-width `r` of `F = U[cu − r, cu + r]`,
    /// `G = U[cm − r, cm + r]` at fixed `η` and `w`.
    ToleranceRange {
        users_center: f64,
        miners_center: f64,
        w: f64,
        eta: f64,
        lo: f64,
        hi: f64,
    },
}

impl ScanFamily {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            ScanFamily::Eta { lo, hi, .. } | ScanFamily::ToleranceRange { lo, hi, .. } => (lo, hi),
        }
    }

    fn at(&self, p: f64) -> Result<(MarketInstance, f64)> {
        match self {
            ScanFamily::Eta { inst, .. } => Ok((inst.clone(), p)),
            ScanFamily::ToleranceRange {
                users_center,
                miners_center,
                w,
                eta,
                ..
            } => {
                let f = ToleranceDistribution::uniform(users_center - p, users_center + p)?;
                let g = ToleranceDistribution::uniform(miners_center - p, miners_center + p)?;
                Ok((MarketInstance::new(f, g, *w)?, *eta))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub rule: UpdateRule,
    pub n_params: usize,
    pub burn_in: usize,
    pub n_record: usize,
    pub lambda0: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            rule: UpdateRule::Full,
            n_params: 400,
            burn_in: 200,
            n_record: 200,
            lambda0: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub param: f64,
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub mean: f64,
}

impl ScanRow {
    /// `max − min` of the recorded λ values.
    pub fn band_width(&self) -> f64 {
        let (lo, hi) = self
            .lambdas
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
                (lo.min(l), hi.max(l))
            });
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub burn_in: usize,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    /// Long format `param,t,lambda,delta`, one line per recorded step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "param,t,lambda,delta")?;
        for row in &self.rows {
            for (j, (l, d)) in row.lambdas.iter().zip(&row.deltas).enumerate() {
                writeln!(out, "{},{},{l},{d}", row.param, self.burn_in + 1 + j)?;
            }
        }
        Ok(())
    }
}

/// For each of `n_params` evenly spaced parameters, runs `burn_in + n_record`
/// steps from `lambda0` and keeps the last `n_record` points.
pub fn bifurcation_scan(family: &ScanFamily, spec: &ScanSpec, exec: Execution) -> Result<ScanTable> {
    if spec.n_params < 2 {
        return Err(Error::argument("a scan needs at least two parameter values"));
    }
    if spec.burn_in == 0 || spec.n_record == 0 {
        return Err(Error::argument("burn_in and n_record must be positive"));
    }
    if !spec.rule.admissible(spec.lambda0) {
        return Err(Error::precondition(format!(
            "lambda0={} is outside the admissible range {} of the {} rule",
            spec.lambda0,
            spec.rule.admissible_range(),
            spec.rule
        )));
    }
    let (lo, hi) = family.bounds();
    if !(lo < hi) {
        return Err(Error::argument(format!(
            "scan range must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if let ScanFamily::Eta { .. } = family {
        if !(lo > 0.0) {
            return Err(Error::argument(format!("eta range must be positive, got [{lo}, {hi}]")));
        }
    }
    let params: Vec<f64> = (0..spec.n_params)
        .map(|i| lo + (hi - lo) * (i as f64) / ((spec.n_params - 1) as f64))
        .collect();
    let rows = exec::map(exec, &params, |&p| -> Result<ScanRow> {
        let (inst, eta) = family.at(p)?;
        let k = inst.burn().reference_k();
        let mut l = spec.lambda0;
        for _ in 0..spec.burn_in {
            l = inst.step(spec.rule, l, eta, k);
        }
        let mut lambdas = Vec::with_capacity(spec.n_record);
        let mut deltas = Vec::with_capacity(spec.n_record);
        for _ in 0..spec.n_record {
            l = inst.step(spec.rule, l, eta, k);
            lambdas.push(l);
            deltas.push(inst.delta(l, k));
        }
        let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
        Ok(ScanRow {
            param: p,
            lambdas,
            deltas,
            mean,
        })
    });
    Ok(ScanTable {
        burn_in: spec.burn_in,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;

    fn uu(w: f64) -> MarketInstance {
        let u = ToleranceDistribution::uniform(0.0, 1.0).unwrap();
        MarketInstance::new(u.clone(), u, w).unwrap()
    }

    fn normal() -> MarketInstance {
        MarketInstance::new(
            ToleranceDistribution::truncated_normal(0.4, 0.01).unwrap(),
            ToleranceDistribution::truncated_normal(0.5, 0.01).unwrap(),
            1.6,
        )
        .unwrap()
    }

    #[test]
    fn iterate_examples() {
        let m = uu(1.0);
        assert_eq!(iterate_k(&m, UpdateRule::Full, 1.0, 1, 0.25), 0.34375);
        let two = iterate_k(&m, UpdateRule::Full, 1.0, 2, 0.25);
        assert_eq!(two, m.step(UpdateRule::Full, 0.34375, 1.0, 1.0));
        assert!((two - 0.41425).abs() < 1e-5);
        assert_eq!(iterate_k(&m, UpdateRule::Full, 3.0, 7, 0.5), 0.5);
    }

    #[test]
    fn k1_finds_only_the_interior_root() {
        let n = normal();
        let r = find_periodic_points(&n, UpdateRule::Full, 0.6, 1, 10_000, 1e-10, Execution::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert!((r.points[0].x - n.lambda_star()).abs() < 1e-12);
        assert_eq!(r.points[0].least_period, 1);
        assert_eq!(r.points[0].stability, Stability::Stable);
    }

    #[test]
    fn convergent_regime_has_no_cycles() {
        let r = find_periodic_points(&uu(1.0), UpdateRule::Full, 0.1, 4, 100_000, 1e-10, Execution::default()).unwrap();
        assert_eq!(r.fixed_points().len(), 1);
        assert!((r.points[0].x - 0.5).abs() < 1e-12);
        assert_eq!(r.points[0].least_period, 1);
    }

    #[test]
    fn two_cycle_of_uniform_market() {
        // Δ = 1 − 2λ, past the flip at η = 4 the map has a 2-cycle
        let m = uu(1.0);
        let r = find_periodic_points(&m, UpdateRule::Full, 4.5, 2, 100_000, 1e-10, Execution::default()).unwrap();
        let two = r.with_least_period(2);
        assert_eq!(two.len(), 2);
        for p in two {
            let y = iterate_k(&m, UpdateRule::Full, 4.5, 1, p.x);
            assert!((iterate_k(&m, UpdateRule::Full, 4.5, 1, y) - p.x).abs() < 1e-9);
            assert!((y - p.x).abs() > 1e-6);
        }
        assert_eq!(r.with_least_period(1)[0].stability, Stability::Unstable);
    }

    #[test]
    fn periodic_points_satisfy_their_period() {
        let n = normal();
        let tol = 1e-10;
        for k in [2, 4, 6] {
            let r = find_periodic_points(&n, UpdateRule::Full, 1.7, k, 20_000, tol, Execution::default()).unwrap();
            for p in &r.points {
                assert_eq!(k % p.least_period, 0);
                let mut x = p.x;
                let mut orbit = vec![];
                for _ in 0..p.least_period {
                    assert!((iterate_k(&n, UpdateRule::Full, 1.7, p.least_period, x) - x).abs() <= 10.0 * tol);
                    orbit.push(x);
                    x = iterate_k(&n, UpdateRule::Full, 1.7, 1, x);
                }
                for i in 0..orbit.len() {
                    for j in 0..i {
                        assert!((orbit[i] - orbit[j]).abs() > 10.0 * tol);
                    }
                }
            }
        }
    }

    #[test]
    fn scan_modes_agree() {
        let n = normal();
        let a = find_periodic_points(&n, UpdateRule::Full, 1.5, 5, 20_000, 1e-10, Execution::Sequential).unwrap();
        let b = find_periodic_points(&n, UpdateRule::Full, 1.5, 5, 20_000, 1e-10, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn period_report_csv() {
        let r = find_periodic_points(&uu(1.0), UpdateRule::Full, 0.5, 1, 1000, 1e-10, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, true).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,fixed_point,least_period,stable\n1,0.5,1,true\n"
        );
    }

    #[test]
    fn default_grid_grows_with_k() {
        assert_eq!(default_grid_n(1), 200);
        assert_eq!(default_grid_n(3), 800);
        assert_eq!(default_grid_n(16), 3200);
    }

    #[test]
    fn sharkovsky_examples() {
        assert!((1..=64).all(sharkovsky_implied(3)));
        let two = sharkovsky_implied(2);
        assert!(two(1) && two(2));
        assert!((3..=64).all(|l| !two(l)));
        let twelve = sharkovsky_implied(12);
        for l in [20, 8, 16, 4, 2, 1] {
            assert!(twelve(l), "12 should force {l}");
        }
        for l in [3, 6, 5, 10] {
            assert!(!twelve(l), "12 should not force {l}");
        }
    }

    #[test]
    fn sharkovsky_is_a_strict_total_order() {
        for n in 1..=64u64 {
            for m in 1..=64u64 {
                if n != m {
                    assert!(sharkovsky_implies(n, m) ^ sharkovsky_implies(m, n), "{n} vs {m}");
                }
            }
        }
        let mut v: Vec<u64> = (1..=12).collect();
        v.sort_by(|&a, &b| sharkovsky_cmp(a, b));
        assert_eq!(v, vec![3, 5, 7, 9, 11, 6, 10, 12, 8, 4, 2, 1]);
    }

    #[test]
    fn witness_at_unit_intensity() {
        let wit = chaos_witness(1.0, 1.0, 0.1, 200).unwrap();
        assert_eq!(wit.lambda1, wit.a);
        assert!((wit.lambda2 - (wit.a + wit.a * (1.0 - wit.a))).abs() < 1e-15);
        assert!(wit.lambda3 <= wit.lambda0 && wit.lambda0 < wit.lambda1 && wit.lambda1 < wit.lambda2);
        let check = wit.recheck().unwrap();
        assert!(check.holds(1e-10), "{check:?}");
    }

    #[test]
    fn witness_at_small_intensity() {
        let wit = chaos_witness(0.1, 1.0, 0.1, 200).unwrap();
        assert!(wit.mass_below_a > 0.0);
        assert!(wit.recheck().unwrap().holds(1e-10));
        // ρ = 0 is the plain uniform law
        let plain = chaos_witness(2.0, 1.0, 0.1, 200).unwrap();
        assert_eq!(plain.mass_below_a, 0.0);
        assert!(matches!(
            plain.tolerance_law().unwrap(),
            ToleranceDistribution::Uniform(_)
        ));
    }

    #[test]
    fn witness_rejects_bad_arguments() {
        assert!(chaos_witness(0.0, 1.0, 0.1, 200).is_err());
        assert!(chaos_witness(1.0, 1.0, 1.5, 200).is_err());
        assert!(chaos_witness(1.0, 1.0, 0.1, 0).is_err());
    }

    #[test]
    fn eta_scan_converges_below_threshold() {
        let m = uu(1.0);
        // contraction near λ* is 1 − η/2 per step, so η = 0.05 needs a long burn-in
        let spec = ScanSpec {
            n_params: 80,
            burn_in: 2000,
            ..ScanSpec::default()
        };
        let fam = ScanFamily::Eta {
            inst: m.clone(),
            lo: 0.05,
            hi: 3.9,
        };
        let t = bifurcation_scan(&fam, &spec, Execution::default()).unwrap();
        assert_eq!(t.rows.len(), 80);
        let thr = analysis::convergence_threshold(&m, 100_000, Execution::default()).unwrap();
        for row in &t.rows {
            if row.param <= 0.99 * thr {
                assert!(row.lambdas.iter().all(|l| (l - 0.5).abs() < 1e-4), "eta={}", row.param);
            }
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 1 + 80 * 200);
        assert!(s.lines().nth(1).unwrap().starts_with("0.05,2001,"));
    }

    #[test]
    fn absorbed_rows_stay_at_zero() {
        let fam = ScanFamily::Eta {
            inst: normal(),
            lo: 1.9,
            hi: 3.0,
        };
        let t = bifurcation_scan(
            &fam,
            &ScanSpec {
                n_params: 12,
                ..ScanSpec::default()
            },
            Execution::default(),
        )
        .unwrap();
        for row in &t.rows {
            if let Some(first) = row.lambdas.iter().position(|&l| l == 0.0) {
                assert!(row.lambdas[first..].iter().all(|&l| l == 0.0));
            }
        }
    }

    #[test]
    fn range_scan_builds_uniform_instances() {
        let fam = ScanFamily::ToleranceRange {
            users_center: 0.5,
            miners_center: 0.4,
            w: 1.0,
            eta: 1.0,
            lo: 0.1,
            hi: 0.4,
        };
        let t = bifurcation_scan(
            &fam,
            &ScanSpec {
                n_params: 4,
                ..ScanSpec::default()
            },
            Execution::default(),
        )
        .unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows[3].band_width() < 1e-4);
        assert!(bifurcation_scan(
            &fam,
            &ScanSpec {
                n_params: 1,
                ..ScanSpec::default()
            },
            Execution::default()
        )
        .is_err());
    }
}
