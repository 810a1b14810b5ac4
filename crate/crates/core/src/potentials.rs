//! Trapping potentials of the form `V(x) = h(x) Π_j |x - x_j|^{p_j}` and the
//! flatness data of a pair of them at their common zeros.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralGrid;

/// Two zero locations closer than this are the same point.
pub const ZERO_MATCH_TOL: f64 = 1e-12;

/// Exponents must stay below this for `∫|x|^p Q²` to be finite.
pub const MAX_EXPONENT: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroSpec {
    pub location: f64,
    pub exponent: f64,
}

/// The bounded factor `h` multiplying the product of distances.
#[derive(Clone)]
pub enum Modulator {
    Constant(f64),
    /// `base + amplitude·cos(wavenumber·x)`, requires `base > |amplitude|`.
    Cosine {
        base: f64,
        amplitude: f64,
        wavenumber: f64,
    },
    /// A user-supplied smooth function together with claimed bounds.
    Custom {
        label: String,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        lower: f64,
        upper: f64,
    },
}

impl fmt::Debug for Modulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulator::Constant(c) => write!(f, "Constant({c})"),
            Modulator::Cosine {
                base,
                amplitude,
                wavenumber,
            } => write!(f, "Cosine({base} + {amplitude} cos({wavenumber} x))"),
            Modulator::Custom {
                label,
                lower,
                upper,
                ..
            } => write!(f, "Custom({label} in [{lower}, {upper}])"),
        }
    }
}

impl Modulator {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Modulator::Constant(c) => *c,
            Modulator::Cosine {
                base,
                amplitude,
                wavenumber,
            } => base + amplitude * (wavenumber * x).cos(),
            Modulator::Custom { eval, .. } => eval(x),
        }
    }

    /// Analytic `(lower, upper)` bounds.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Modulator::Constant(c) => (*c, *c),
            Modulator::Cosine {
                base, amplitude, ..
            } => (base - amplitude.abs(), base + amplitude.abs()),
            Modulator::Custom { lower, upper, .. } => (*lower, *upper),
        }
    }

    fn scaled(&self, c: f64) -> Modulator {
        match self {
            Modulator::Constant(h) => Modulator::Constant(c * h),
            Modulator::Cosine {
                base,
                amplitude,
                wavenumber,
            } => Modulator::Cosine {
                base: c * base,
                amplitude: c * amplitude,
                wavenumber: *wavenumber,
            },
            Modulator::Custom {
                label,
                eval,
                lower,
                upper,
            } => {
                let inner = eval.clone();
                Modulator::Custom {
                    label: format!("{c}*{label}"),
                    eval: Arc::new(move |x| c * inner(x)),
                    lower: c * lower,
                    upper: c * upper,
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PotentialSpec {
    zeros: Vec<ZeroSpec>,
    modulator: Modulator,
}

impl PotentialSpec {
    pub fn new(zeros: Vec<ZeroSpec>, modulator: Modulator) -> Result<Self> {
        if zeros.is_empty() {
            return Err(Error::InvalidPotential("at least one zero is required".into()));
        }
        for (i, z) in zeros.iter().enumerate() {
            if !z.location.is_finite() {
                return Err(Error::InvalidPotential(format!("zero {i} has non-finite location")));
            }
            if !(z.exponent > 0.0 && z.exponent < MAX_EXPONENT) {
                return Err(Error::InvalidPotential(format!(
                    "zero {i} has exponent {}, outside (0, 3): the moment ∫|x|^p Q² is only integrable for p < 3",
                    z.exponent
                )));
            }
            for (j, w) in zeros.iter().enumerate().skip(i + 1) {
                if (z.location - w.location).abs() <= ZERO_MATCH_TOL {
                    return Err(Error::InvalidPotential(format!(
                        "zeros {i} and {j} coincide at {}",
                        z.location
                    )));
                }
            }
        }
        let (lo, hi) = modulator.bounds();
        if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidPotential(format!(
                "modulator bounds [{lo}, {hi}] are not strictly positive and finite"
            )));
        }
        Ok(Self { zeros, modulator })
    }

    /// `|x - location|^exponent` with unit modulator.
    pub fn power(location: f64, exponent: f64) -> Result<Self> {
        Self::new(vec![ZeroSpec { location, exponent }], Modulator::Constant(1.0))
    }

    pub fn product(zeros: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            zeros
                .iter()
                .map(|&(location, exponent)| ZeroSpec { location, exponent })
                .collect(),
            Modulator::Constant(1.0),
        )
    }

    pub fn zeros(&self) -> &[ZeroSpec] {
        &self.zeros
    }

    pub fn modulator(&self) -> &Modulator {
        &self.modulator
    }

    /// True iff every exponent lies in `(0, 1)`, the regime of the blow-up theorem.
    pub fn theorem_regime(&self) -> bool {
        self.zeros.iter().all(|z| z.exponent < 1.0)
    }

    pub fn max_exponent(&self) -> f64 {
        self.zeros.iter().fold(0.0, |m, z| m.max(z.exponent))
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.modulator.eval(x)
            * self
                .zeros
                .iter()
                .map(|z| (x - z.location).abs().powf(z.exponent))
                .product::<f64>()
    }

    pub fn sample(&self, grid: &SpectralGrid) -> Vec<f64> {
        grid.nodes().iter().map(|&x| self.evaluate(x)).collect()
    }

    /// Same zeros, modulator multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.zeros.clone(), self.modulator.scaled(c))
    }

    /// Checks the modulator on every grid node (and midpoints) and returns the
    /// certified constant `C` with `C ≤ h ≤ 1/C`.
    pub fn certify_on(&self, grid: &SpectralGrid) -> Result<f64> {
        let h = grid.spacing();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in grid.nodes() {
            for y in [x, x + 0.5 * h] {
                let v = self.modulator.eval(y);
                if !v.is_finite() {
                    return Err(Error::InvalidPotential(format!("modulator is not finite at {y}")));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        // sampled extrema may miss the true ones between nodes
        let margin = 0.99;
        let c = (margin * lo).min(1.0 / (hi / margin));
        if !(c > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "modulator leaves (0, ∞) on the grid: sampled range [{lo}, {hi}]"
            )));
        }
        Ok(c)
    }

    /// `h(x) Π_{k≠skip} |x - x_k|^{p_k}`: the smooth factor left after dividing
    /// out the zero at index `skip`.
    fn cofactor(&self, x: f64, skip: usize) -> f64 {
        self.modulator.eval(x)
            * self
                .zeros
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != skip)
                .map(|(_, z)| (x - z.location).abs().powf(z.exponent))
                .product::<f64>()
    }

    fn zero_near(&self, x: f64) -> Option<(usize, &ZeroSpec)> {
        self.zeros
            .iter()
            .enumerate()
            .find(|(_, z)| (z.location - x).abs() <= ZERO_MATCH_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    /// Common zeros, sorted.
    pub common_zeros: Vec<f64>,
    /// Smaller of the two exponents at each common zero.
    pub pbar: Vec<f64>,
    pub p0: f64,
    /// Limit of `(V₁+V₂)/|x - x_j|^{p0}` at each common zero; `+∞` off the
    /// maximal-index set. Serialized as `null` when infinite.
    pub gammas: Vec<f64>,
    pub gamma: f64,
    /// The common zeros attaining `gamma`.
    pub flattest: Vec<f64>,
}

impl FlatnessReport {
    /// Member of the flattest set nearest to `x`.
    pub fn nearest_flattest(&self, x: f64) -> f64 {
        self.flattest
            .iter()
            .copied()
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
            .expect("flattest set is non-empty")
    }
}

pub fn flatness_analysis(v1: &PotentialSpec, v2: &PotentialSpec) -> Result<FlatnessReport> {
    let mut shared: Vec<(f64, usize, usize)> = v1
        .zeros
        .iter()
        .enumerate()
        .filter_map(|(i, z)| v2.zero_near(z.location).map(|(j, _)| (z.location, i, j)))
        .collect();
    if shared.is_empty() {
        return Err(Error::NoCommonZero);
    }
    shared.sort_by(|a, b| a.0.total_cmp(&b.0));

    let pbar: Vec<f64> = shared
        .iter()
        .map(|&(_, i, j)| v1.zeros[i].exponent.min(v2.zeros[j].exponent))
        .collect();
    let p0 = pbar.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let gammas: Vec<f64> = shared
        .iter()
        .zip(&pbar)
        .map(|(&(x, i, j), &pb)| {
            if pb < p0 {
                return f64::INFINITY;
            }
            // Only a component whose exponent equals p0 survives the limit.
            let mut g = 0.0;
            if v1.zeros[i].exponent == p0 {
                g += v1.cofactor(x, i);
            }
            if v2.zeros[j].exponent == p0 {
                g += v2.cofactor(x, j);
            }
            g
        })
        .collect();
    let gamma = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let flattest = shared
        .iter()
        .zip(&gammas)
        .filter(|(_, &g)| g.is_finite() && (g - gamma).abs() <= 1e-12 * gamma)
        .map(|(&(x, _, _), _)| x)
        .collect();
    Ok(FlatnessReport {
        common_zeros: shared.iter().map(|s| s.0).collect(),
        pbar,
        p0,
        gammas,
        gamma,
        flattest,
    })
}

/// `(V₁+V₂)(x₀+δ) / |δ|^{p0}`, the finite-difference side of the `γ` limit.
pub fn flatness_quotient(v1: &PotentialSpec, v2: &PotentialSpec, x0: f64, p0: f64, delta: f64) -> f64 {
    (v1.evaluate(x0 + delta) + v2.evaluate(x0 + delta)) / delta.abs().powf(p0)
}

/// `λ = (p0 γ m / 2)^{1/(p0+1)}` with `m = ∫|x|^{p0} Q²`.
pub fn predicted_lambda(report: &FlatnessReport, q_moment: f64) -> Result<f64> {
    lambda_from(report.p0, report.gamma, q_moment)
}

pub fn lambda_from(p0: f64, gamma: f64, q_moment: f64) -> Result<f64> {
    if !(p0.is_finite() && p0 > 0.0 && gamma.is_finite() && gamma > 0.0 && q_moment.is_finite() && q_moment > 0.0)
    {
        return Err(Error::InvalidInput(format!(
            "predicted λ needs finite positive p0, γ, moment; got p0={p0}, γ={gamma}, m={q_moment}"
        )));
    }
    Ok((0.5 * p0 * gamma * q_moment).powf(1.0 / (p0 + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        let v = PotentialSpec::power(0.0, 0.5).unwrap();
        assert_relative_eq!(v.evaluate(4.0), 2.0);
        assert_eq!(v.evaluate(0.0), 0.0);
        let w = PotentialSpec::product(&[(-1.0, 0.5), (1.0, 0.75)]).unwrap();
        assert_relative_eq!(w.evaluate(0.0), 1.0);
        assert_eq!(w.evaluate(-1.0), 0.0);
        assert_eq!(w.evaluate(1.0), 0.0);
    }

    #[test]
    fn construction_rejects_bad_specs() {
        assert!(PotentialSpec::power(0.0, 3.5).is_err());
        assert!(PotentialSpec::power(0.0, 0.0).is_err());
        assert!(PotentialSpec::product(&[(1.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(PotentialSpec::new(vec![ZeroSpec { location: 0.0, exponent: 0.5 }], Modulator::Constant(-1.0)).is_err());
        assert!(PotentialSpec::new(
            vec![ZeroSpec { location: 0.0, exponent: 0.5 }],
            Modulator::Cosine { base: 1.0, amplitude: 1.5, wavenumber: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn regime_flag() {
        assert!(PotentialSpec::power(0.0, 0.99).unwrap().theorem_regime());
        assert!(!PotentialSpec::power(0.0, 1.0).unwrap().theorem_regime());
        assert!(!PotentialSpec::product(&[(0.0, 0.5), (2.0, 2.5)]).unwrap().theorem_regime());
    }

    #[test]
    fn certify_modulator() {
        let g = SpectralGrid::new(16.0, 64).unwrap();
        let v = PotentialSpec::new(
            vec![ZeroSpec { location: 0.0, exponent: 0.5 }],
            Modulator::Cosine { base: 2.0, amplitude: 0.5, wavenumber: 1.0 },
        )
        .unwrap();
        let c = v.certify_on(&g).unwrap();
        assert!(c > 0.0 && c <= 1.5 && 1.0 / c >= 2.5);
        let bad = PotentialSpec::new(
            vec![ZeroSpec { location: 0.0, exponent: 0.5 }],
            Modulator::Custom { label: "lies".into(), eval: Arc::new(|x| x.sin()), lower: 0.5, upper: 2.0 },
        )
        .unwrap();
        assert!(bad.certify_on(&g).is_err());
    }

    #[test]
    fn flatness_single_zero() {
        let v = PotentialSpec::power(0.0, 0.5).unwrap();
        let r = flatness_analysis(&v, &v).unwrap();
        assert_eq!(r.common_zeros, vec![0.0]);
        assert_eq!(r.p0, 0.5);
        assert_relative_eq!(r.gamma, 2.0);
        assert_eq!(r.flattest, vec![0.0]);
    }

    #[test]
    fn flatness_two_zeros_selects_flatter() {
        let v = PotentialSpec::product(&[(-1.0, 0.5), (1.0, 0.75)]).unwrap();
        let r = flatness_analysis(&v, &v).unwrap();
        assert_eq!(r.pbar, vec![0.5, 0.75]);
        assert_eq!(r.p0, 0.75);
        assert!(r.gammas[0].is_infinite());
        assert_relative_eq!(r.gammas[1], 2.0 * 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(r.flattest, vec![1.0]);
        // the finite-difference quotient approaches the closed form
        let mut last = f64::INFINITY;
        for k in 3..=6 {
            let d = 10f64.powi(-k);
            for s in [1.0, -1.0] {
                let q = flatness_quotient(&v, &v, 1.0, r.p0, s * d);
                let err = (q - r.gamma).abs() / r.gamma;
                assert!(err < 10.0 * d, "k={k}: {q}");
            }
            let err = (flatness_quotient(&v, &v, 1.0, r.p0, d) - r.gamma).abs();
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn flatness_mixed_exponents() {
        let v1 = PotentialSpec::power(0.0, 0.5).unwrap();
        let v2 = PotentialSpec::power(0.0, 0.25).unwrap();
        let r = flatness_analysis(&v1, &v2).unwrap();
        assert_eq!(r.pbar, vec![0.25]);
        assert_eq!(r.p0, 0.25);
        assert_relative_eq!(r.gamma, 1.0);
        let q = flatness_quotient(&v1, &v2, 0.0, 0.25, 1e-12);
        assert!((q - 1.0).abs() < 1e-2);
    }

    #[test]
    fn no_common_zero() {
        let v1 = PotentialSpec::power(0.0, 0.5).unwrap();
        let v2 = PotentialSpec::power(1.0, 0.5).unwrap();
        assert!(matches!(flatness_analysis(&v1, &v2), Err(Error::NoCommonZero)));
    }

    #[test]
    fn lambda_examples() {
        let r = FlatnessReport {
            common_zeros: vec![0.0],
            pbar: vec![1.0],
            p0: 1.0,
            gammas: vec![2.0],
            gamma: 2.0,
            flattest: vec![0.0],
        };
        assert_relative_eq!(predicted_lambda(&r, 1.0).unwrap(), 1.0);
        let m: f64 = 3.7;
        assert_relative_eq!(lambda_from(0.5, 2.0, m).unwrap(), (m / 2.0).powf(2.0 / 3.0), max_relative = 1e-14);
        assert!(lambda_from(0.5, f64::INFINITY, 1.0).is_err());
        assert!(lambda_from(0.5, 2.0, f64::NAN).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = PotentialSpec> {
        (
            proptest::collection::vec((-3i32..=3, prop_oneof![Just(0.25), Just(0.5), Just(0.75)]), 1..4),
            0.5f64..2.0,
        )
            .prop_map(|(zs, c)| {
                let mut seen = std::collections::BTreeMap::new();
                for (loc, p) in zs {
                    seen.insert(loc, p);
                }
                let zeros = seen
                    .into_iter()
                    .map(|(l, p)| ZeroSpec { location: l as f64, exponent: p })
                    .collect();
                PotentialSpec::new(zeros, Modulator::Constant(c)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn symmetric_in_arguments(v1 in arb_spec(), v2 in arb_spec()) {
            match (flatness_analysis(&v1, &v2), flatness_analysis(&v2, &v1)) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(&a.common_zeros, &b.common_zeros);
                    prop_assert_eq!(&a.pbar, &b.pbar);
                    prop_assert_eq!(a.p0, b.p0);
                    prop_assert_eq!(&a.flattest, &b.flattest);
                    for (x, y) in a.gammas.iter().zip(&b.gammas) {
                        prop_assert!(x == y || (x - y).abs() <= 1e-14 * x.abs());
                    }
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }

        #[test]
        fn gamma_scales_with_modulator(v1 in arb_spec(), v2 in arb_spec(), c in 0.1f64..10.0) {
            if let Ok(a) = flatness_analysis(&v1, &v2) {
                let b = flatness_analysis(&v1.scaled(c).unwrap(), &v2.scaled(c).unwrap()).unwrap();
                prop_assert_eq!(&a.common_zeros, &b.common_zeros);
                prop_assert_eq!(a.p0, b.p0);
                prop_assert_eq!(&a.flattest, &b.flattest);
                for (x, y) in a.gammas.iter().zip(&b.gammas) {
                    if x.is_finite() {
                        prop_assert!((c * x - y).abs() <= 1e-12 * y.abs());
                    } else {
                        prop_assert!(y.is_infinite());
                    }
                }
            }
        }

        #[test]
        fn quotient_converges_at_flattest(v in arb_spec()) {
            let r = flatness_analysis(&v, &v).unwrap();
            for &x in &r.flattest {
                let q = flatness_quotient(&v, &v, x, r.p0, 1e-6);
                prop_assert!((q - r.gamma).abs() <= 0.01 * r.gamma);
            }
        }
    }
}
