//! Pressure law, free-energy densities, the double-well potential with its
//! convex/concave splitting, viscosity laws, and a sampling-based check that
//! a concrete parameter set meets the standing structural assumptions.

use crate::error::{Error, Result};

/// Isentropic pressure `p_e(rho) = a rho^gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureLaw {
    gamma: f64,
    a: f64,
}

impl PressureLaw {
    /// `gamma = 1` is rejected because the Helmholtz density degenerates.
    pub fn new(gamma: f64, a: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma}; the pressure potential needs gamma > 1"
            )));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("pressure coefficient a = {a} must be positive")));
        }
        Ok(PressureLaw { gamma, a })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn p(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }

    #[inline]
    pub fn dp(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 1.0)
    }

    /// `F_e(rho) = rho f_e(rho) = a rho (rho^(gamma-1) - 1) / (gamma - 1)`.
    pub fn helmholtz(&self, rho: f64) -> f64 {
        self.a * rho * (rho.powf(self.gamma - 1.0) - 1.0) / (self.gamma - 1.0)
    }

    /// `H(rho) = F_e(rho) - F_e'(1)(rho - 1) - F_e(1)
    ///        = a (rho^gamma - 1 - gamma (rho - 1)) / (gamma - 1)`.
    ///
    /// Near `rho = 1` the binomial series is summed to avoid cancellation.
    pub fn rel_potential(&self, rho: f64) -> f64 {
        let g = self.gamma;
        let d = rho - 1.0;
        let body = if d.abs() < 0.05 {
            // sum_{k >= 2} binom(g, k) d^k
            let mut coef = g * (g - 1.0) / 2.0;
            let mut pow = d * d;
            let mut sum = 0.0;
            for k in 2..16 {
                sum += coef * pow;
                coef *= (g - k as f64) / (k as f64 + 1.0);
                pow *= d;
            }
            sum
        } else {
            (g * d.ln_1p()).exp_m1() - g * d
        };
        self.a * body / (g - 1.0)
    }

    /// `H'(rho) = F_e'(rho) - F_e'(1)`.
    pub fn rel_potential_derivative(&self, rho: f64) -> f64 {
        self.a * self.gamma * (rho.powf(self.gamma - 1.0) - 1.0) / (self.gamma - 1.0)
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho.is_finite() && rho >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("density {rho} must be nonnegative")))
    }
}

pub fn pressure(law: &PressureLaw, rho: f64) -> Result<f64> {
    check_density(rho)?;
    Ok(law.p(rho))
}

pub fn dpressure(law: &PressureLaw, rho: f64) -> Result<f64> {
    check_density(rho)?;
    Ok(law.dp(rho))
}

pub fn helmholtz_f(law: &PressureLaw, rho: f64) -> Result<f64> {
    check_density(rho)?;
    Ok(law.helmholtz(rho))
}

pub fn rel_pressure_potential(law: &PressureLaw, rho: f64) -> Result<f64> {
    check_density(rho)?;
    Ok(law.rel_potential(rho))
}

/// Quartic double well `(c^2 - 1)^2 / 4` on `|c| <= c_t`, continued by the
/// quadratic that matches value, slope and curvature at `+-c_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialSpec {
    kappa: f64,
    c_t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValue {
    pub g: f64,
    pub dg: f64,
    pub d2g: f64,
}

/// Convex part `G0 = G - G1` and concave part `G1 = -kappa c^2 / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitValue {
    pub convex: PotentialValue,
    pub concave: PotentialValue,
}

impl PotentialSpec {
    pub fn new(kappa: f64, c_t: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must be >= 0")));
        }
        if !(c_t.is_finite() && c_t > 1.0) {
            return Err(Error::InvalidParameter(format!("truncation radius c_t = {c_t} must exceed 1")));
        }
        Ok(PotentialSpec { kappa, c_t })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn c_t(&self) -> f64 {
        self.c_t
    }

    /// Global Lipschitz constant of `G'`: `3 c_t^2 - 1`.
    pub fn lipschitz(&self) -> f64 {
        3.0 * self.c_t * self.c_t - 1.0
    }

    /// Stabilization used by the linearly implicit Cahn-Hilliard steps.
    pub fn stabilization(&self) -> f64 {
        0.5 * self.lipschitz()
    }

    /// One constant bounding the growth of `G'` and the Lipschitz moduli of
    /// `G'` and `G''` (the latter is `6 c_t`).
    pub fn growth_constant(&self) -> f64 {
        self.lipschitz().max(6.0 * self.c_t)
    }

    #[inline]
    pub fn g(&self, c: f64) -> f64 {
        let a = c.abs();
        if a <= self.c_t {
            let q = c * c - 1.0;
            0.25 * q * q
        } else {
            let ct = self.c_t;
            let g0 = 0.25 * (ct * ct - 1.0).powi(2);
            let g1 = ct * ct * ct - ct;
            let s = a - ct;
            g0 + g1 * s + 0.5 * self.lipschitz() * s * s
        }
    }

    #[inline]
    pub fn dg(&self, c: f64) -> f64 {
        let a = c.abs();
        if a <= self.c_t {
            c * c * c - c
        } else {
            let ct = self.c_t;
            c.signum() * (ct * ct * ct - ct + self.lipschitz() * (a - ct))
        }
    }

    #[inline]
    pub fn d2g(&self, c: f64) -> f64 {
        if c.abs() <= self.c_t {
            3.0 * c * c - 1.0
        } else {
            self.lipschitz()
        }
    }
}

pub fn potential_g(spec: &PotentialSpec, c: f64) -> PotentialValue {
    PotentialValue {
        g: spec.g(c),
        dg: spec.dg(c),
        d2g: spec.d2g(c),
    }
}

pub fn split_g(spec: &PotentialSpec, c: f64) -> SplitValue {
    let k = spec.kappa;
    let full = potential_g(spec, c);
    let concave = PotentialValue {
        g: -0.5 * k * c * c,
        dg: -k * c,
        d2g: -k,
    };
    SplitValue {
        convex: PotentialValue {
            g: full.g - concave.g,
            dg: full.dg - concave.dg,
            d2g: full.d2g - concave.d2g,
        },
        concave,
    }
}

/// Phase-dependent viscosities `nu(c) = nu0 + nu1 clamp(c, -1, 1)`,
/// `eta(c) = eta0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViscosityLaw {
    nu0: f64,
    nu1: f64,
    eta0: f64,
}

impl ViscosityLaw {
    pub fn new(nu0: f64, nu1: f64, eta0: f64) -> Result<Self> {
        if !(nu0.is_finite() && nu1.is_finite() && nu0 > nu1.abs()) {
            return Err(Error::InvalidParameter(format!(
                "viscosity needs nu0 > |nu1| (got nu0 = {nu0}, nu1 = {nu1})"
            )));
        }
        if !(eta0.is_finite() && eta0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta0 = {eta0} must be >= 0")));
        }
        Ok(ViscosityLaw { nu0, nu1, eta0 })
    }

    #[inline]
    pub fn nu(&self, c: f64) -> f64 {
        self.nu0 + self.nu1 * c.clamp(-1.0, 1.0)
    }

    #[inline]
    pub fn eta(&self, _c: f64) -> f64 {
        self.eta0
    }

    pub fn nu_star(&self) -> f64 {
        self.nu0 - self.nu1.abs()
    }

    pub fn nu_sup(&self) -> f64 {
        self.nu0 + self.nu1.abs()
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    /// Worst sampled margin; negative means violated.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const MIN_ASSUMPTION_SAMPLES: usize = 1000;

fn sample(range: (f64, f64), n: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = range;
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

/// Samples every structural inequality on the pressure law and potential.
///
/// Constants: `p1 = pbar = a gamma`, `p2 = 0`; `Gbar = max(3 c_t^2 - 1, 6 c_t)`,
/// lower bound `G' >= L c - 2 c_t^3` with `L = 3 c_t^2 - 1`.
pub fn verify_assumptions(
    law: &PressureLaw,
    spec: &PotentialSpec,
    rho_range: (f64, f64),
    c_range: (f64, f64),
    samples: usize,
) -> Result<AssumptionReport> {
    for (name, (lo, hi)) in [("density", rho_range), ("concentration", c_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("empty {name} sample range [{lo}, {hi}]")));
        }
    }
    if rho_range.0 < 0.0 {
        return Err(Error::InvalidParameter("density samples must be nonnegative".into()));
    }
    if samples < MIN_ASSUMPTION_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "{samples} samples; at least {MIN_ASSUMPTION_SAMPLES} required"
        )));
    }
    let g = law.gamma;
    let p1 = law.a * g;
    let pbar = law.a * g;
    let tol = |scale: f64| 1e-12 * (1.0 + scale.abs());
    let mut checks = Vec::new();
    let mut push = |name, margin: f64, scale: f64| {
        checks.push(AssumptionCheck {
            name,
            margin,
            passed: margin >= -tol(scale),
        })
    };

    checks_gamma(&mut push, g);
    let p0 = law.p(0.0);
    push("p_e(0) = 0", -p0.abs(), 0.0);

    let (mut lower, mut lower_scale) = (f64::INFINITY, 0.0);
    let (mut upper, mut upper_scale) = (f64::INFINITY, 0.0);
    for rho in sample(rho_range, samples) {
        let dp = law.dp(rho);
        let m = dp - p1 * rho.powf(g - 1.0);
        if m < lower {
            lower = m;
            lower_scale = dp;
        }
        let m = pbar * (1.0 + rho.powf(g - 1.0)) - dp;
        if m < upper {
            upper = m;
            upper_scale = dp;
        }
    }
    push("p_e' lower bound", lower, lower_scale);
    push("p_e' upper bound", upper, upper_scale);

    let l = spec.lipschitz();
    let gbar = spec.growth_constant();
    let g2 = 2.0 * spec.c_t.powi(3);
    let cs: Vec<f64> = sample(c_range, samples).collect();
    let mut semiconvex = f64::INFINITY;
    let mut growth = f64::INFINITY;
    let mut coercive = (f64::INFINITY, 0.0);
    let mut lip1 = 0.0_f64;
    let mut lip2 = 0.0_f64;
    for (k, &c) in cs.iter().enumerate() {
        let v = potential_g(spec, c);
        semiconvex = semiconvex.min(v.d2g + spec.kappa);
        growth = growth.min(gbar * (1.0 + c.abs()) - v.dg.abs());
        let m = v.dg - (l * c - g2);
        if m < coercive.0 {
            coercive = (m, l * c);
        }
        if k > 0 {
            let prev = potential_g(spec, cs[k - 1]);
            let dc = c - cs[k - 1];
            lip1 = lip1.max((v.dg - prev.dg).abs() / dc);
            lip2 = lip2.max((v.d2g - prev.d2g).abs() / dc);
        }
    }
    push("G'' >= -kappa", semiconvex, spec.kappa);
    push("|G'| <= Gbar (1 + |c|)", growth, gbar);
    push("G' >= G1 c - G2", coercive.0, coercive.1);
    push("G' Lipschitz", gbar - lip1, gbar);
    push("G'' Lipschitz", gbar - lip2, gbar);
    Ok(AssumptionReport { checks })
}

fn checks_gamma(push: &mut impl FnMut(&'static str, f64, f64), g: f64) {
    // strict inequality: a zero margin fails
    let margin = g - 1.5;
    push("gamma > 3/2", if margin > 0.0 { margin } else { margin.min(-f64::MIN_POSITIVE) }, 0.0);
}

/// Integrability exponents with `1/p = 1/gamma - 1/6`, `1/q = 1/gamma + 1/6`.
pub fn analysis_exponents(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 1.5 && gamma < 6.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma}; the exponents need 3/2 < gamma < 6"
        )));
    }
    let p = 1.0 / (1.0 / gamma - 1.0 / 6.0);
    let q = 1.0 / (1.0 / gamma + 1.0 / 6.0);
    Ok((p, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_law() -> PressureLaw {
        PressureLaw::new(2.0, 1.0).unwrap()
    }

    fn default_spec() -> PotentialSpec {
        PotentialSpec::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn pressure_values() {
        let law = default_law();
        assert_eq!(pressure(&law, 0.0).unwrap(), 0.0);
        assert_eq!(pressure(&law, 1.0).unwrap(), 1.0);
        let law = PressureLaw::new(5.0 / 3.0, 1.0).unwrap();
        assert!((pressure(&law, 2.0).unwrap() - 2f64.powf(5.0 / 3.0)).abs() < 1e-14);
        assert!(pressure(&law, -0.1).is_err());
        assert!(PressureLaw::new(1.0, 1.0).is_err());
    }

    #[test]
    fn dpressure_matches_finite_differences() {
        let law = PressureLaw::new(12.0 / 5.0, 1.3).unwrap();
        for k in 0..=50 {
            let rho = 0.5 + 2.5 * k as f64 / 50.0;
            let h = 1e-5;
            let fd = (law.p(rho + h) - law.p(rho - h)) / (2.0 * h);
            let d = dpressure(&law, rho).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs());
        }
    }

    #[test]
    fn rel_potential_examples() {
        let law = default_law();
        assert!((law.rel_potential(1.5) - 0.25).abs() < 1e-15);
        assert_eq!(law.rel_potential(1.0), 0.0);
        for rho in [0.0, 0.3, 0.97, 1.02, 1.2, 4.0] {
            assert!((law.rel_potential(rho) - (rho - 1.0) * (rho - 1.0)).abs() < 1e-14);
        }
        let law = PressureLaw::new(5.0 / 3.0, 1.0).unwrap();
        let fe2 = 3.0 * (2f64.powf(2.0 / 3.0) - 1.0);
        assert!((law.helmholtz(2.0) - fe2).abs() < 1e-14);
        // F_e'(1) = a
        assert!((law.rel_potential(2.0) - (fe2 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn rel_potential_series_and_direct_branches_agree() {
        let law = PressureLaw::new(2.4, 1.0).unwrap();
        for d in [0.0499999, 0.05, -0.0499999, -0.05] {
            let series_or_direct = law.rel_potential(1.0 + d);
            let direct = ((2.4 * d.ln_1p()).exp_m1() - 2.4 * d) / 1.4;
            assert!((series_or_direct - direct).abs() < 1e-13 * direct);
        }
    }

    #[test]
    fn rel_potential_is_nonnegative_and_vanishes_only_at_one() {
        for law in [default_law(), PressureLaw::new(2.4, 0.7).unwrap()] {
            for k in 0..=2000 {
                let rho = 5.0 * k as f64 / 2000.0;
                let h = law.rel_potential(rho);
                if (rho - 1.0).abs() < 1e-12 {
                    assert_eq!(h, 0.0);
                } else {
                    assert!(h > 0.0, "H({rho}) = {h}");
                }
            }
        }
    }

    #[test]
    fn potential_examples() {
        let s = default_spec();
        for c in [-1.0, 1.0] {
            assert_eq!(s.g(c), 0.0);
            assert_eq!(s.dg(c), 0.0);
        }
        assert_eq!(s.g(0.0), 0.25);
        assert_eq!(s.d2g(0.0), -1.0);
        // dense-sampling oracle for min G''
        let min = (0..=20000)
            .map(|k| -10.0 + 20.0 * k as f64 / 20000.0)
            .map(|c| s.d2g(c))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, -1.0);
    }

    #[test]
    fn extension_is_c2_at_truncation() {
        let s = default_spec();
        for ct in [-2.0, 2.0] {
            let (a, b) = (ct * (1.0 - 1e-12), ct * (1.0 + 1e-12));
            assert!((s.g(a) - s.g(b)).abs() < 1e-9);
            assert!((s.dg(a) - s.dg(b)).abs() < 1e-9);
            assert!((s.d2g(a) - s.d2g(b)).abs() < 1e-9);
        }
        let h = 1e-6;
        for c in [-4.0, -2.5, -0.3, 0.7, 3.1] {
            let fd = (s.g(c + h) - s.g(c - h)) / (2.0 * h);
            assert!((fd - s.dg(c)).abs() < 1e-6 * (1.0 + s.dg(c).abs()));
            let fd2 = (s.dg(c + h) - s.dg(c - h)) / (2.0 * h);
            assert!((fd2 - s.d2g(c)).abs() < 1e-6 * (1.0 + s.d2g(c).abs()));
        }
    }

    #[test]
    fn splitting() {
        let s = default_spec();
        assert_eq!(split_g(&s, 2.0).concave.g, -2.0);
        assert_eq!(split_g(&s, 0.0).convex.d2g, 0.0);
        for k in 0..=600 {
            let c = -3.0 + 6.0 * k as f64 / 600.0;
            let v = split_g(&s, c);
            assert!((v.convex.g - (s.g(c) + 0.5 * c * c)).abs() < 1e-14);
            assert!(v.convex.d2g >= 0.0);
            assert!((v.convex.g + v.concave.g - s.g(c)).abs() < 1e-14);
        }
    }

    #[test]
    fn viscosity_bounds() {
        let v = ViscosityLaw::new(0.1, 0.02, 0.05).unwrap();
        for k in 0..=100 {
            let c = -5.0 + 0.1 * k as f64;
            assert!(v.nu(c) >= v.nu_star() && v.nu(c) <= v.nu_sup());
        }
        assert!(ViscosityLaw::new(0.1, 0.2, 0.0).is_err());
        assert!(ViscosityLaw::new(0.1, 0.0, -1.0).is_err());
    }

    #[test]
    fn assumption_verifier() {
        let r = verify_assumptions(&default_law(), &default_spec(), (0.0, 10.0), (-5.0, 5.0), 4001).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());

        let weak = PotentialSpec::new(0.5, 2.0).unwrap();
        let r = verify_assumptions(&default_law(), &weak, (0.0, 10.0), (-5.0, 5.0), 4001).unwrap();
        let failed: Vec<_> = r.failures().map(|c| c.name).collect();
        assert_eq!(failed, vec!["G'' >= -kappa"]);
        assert!((r.checks.iter().find(|c| c.name == "G'' >= -kappa").unwrap().margin + 0.5).abs() < 1e-12);

        let low = PressureLaw::new(1.4, 1.0).unwrap();
        let r = verify_assumptions(&low, &default_spec(), (0.0, 10.0), (-5.0, 5.0), 4001).unwrap();
        assert_eq!(r.failures().map(|c| c.name).collect::<Vec<_>>(), vec!["gamma > 3/2"]);

        assert!(verify_assumptions(&default_law(), &default_spec(), (1.0, 1.0), (-5.0, 5.0), 4001).is_err());
        assert!(verify_assumptions(&default_law(), &default_spec(), (0.0, 1.0), (-5.0, 5.0), 10).is_err());
    }

    #[test]
    fn exponents() {
        assert_eq!(analysis_exponents(12.0 / 5.0).unwrap(), (4.0, 12.0 / 7.0));
        let (p, q) = analysis_exponents(2.0).unwrap();
        assert!((p - 3.0).abs() < 1e-15 && (q - 1.5).abs() < 1e-15);
        assert!(analysis_exponents(6.0).is_err());
        assert!(analysis_exponents(1.5).is_err());
    }
}
