//! Free-energy densities.
//!
//! A [`Potential`] is split into an implicit convex part and an explicit part
//! for convex-splitting time steps:
//!
//! * regular: `Ψ = Ψ₁ + Ψ₂` with `Ψ₁` convex and `Ψ₂'' ≡ const`,
//! * singular: `Ψₙ = β̂ₙ + Λ` where `β̂ₙ` is the Yosida regularisation of the
//!   indicator of `[lo, hi]` and `Λ` a quadratic perturbation.

/// Polynomial with ascending coefficients `c[0] + c[1] y + ...`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial(coeffs)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    /// `p'(y)` without building the derivative polynomial.
    pub fn eval_derivative(&self, y: f64) -> f64 {
        self.0.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * y + k as f64 * c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(self.0.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect())
    }

    /// Degree ignoring trailing zero coefficients; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.iter().rposition(|&c| c != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularPotential {
    pub convex: Polynomial,
    pub concave: Polynomial,
    /// Exponent `p` of `|Ψ'(y)| <= k (1 + |y|^p)`; metadata only.
    pub growth_p: f64,
    /// Exponent `s` and constant `k1` of `|Ψ'|^s <= k1 (1 + Ψ)`; spot-checked by sampling.
    pub growth_s: f64,
    pub growth_k1: f64,
    /// Constant of the local Lipschitz bound `|Ψ'(a) - Ψ'(b)| <= k3 (1 + a^4 + b^4) |a - b|`.
    pub lipschitz_k3: f64,
    derived: Derivatives,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Derivatives {
    convex_d1: Polynomial,
    convex_d2: Polynomial,
    concave_d1: Polynomial,
}

impl RegularPotential {
    pub fn new(convex: Polynomial, concave: Polynomial, growth_p: f64, growth_s: f64, growth_k1: f64, lipschitz_k3: f64) -> Self {
        let derived = Derivatives {
            convex_d1: convex.derivative(),
            convex_d2: convex.derivative().derivative(),
            concave_d1: concave.derivative(),
        };
        Self { convex, concave, growth_p, growth_s, growth_k1, lipschitz_k3, derived }
    }

    /// `(s² - 1)²` split as `Ψ₁ = s⁴ + 1`, `Ψ₂ = -2 s²`.
    pub fn quartic() -> Self {
        Self::new(
            Polynomial(vec![1.0, 0.0, 0.0, 0.0, 1.0]),
            Polynomial(vec![0.0, 0.0, -2.0]),
            3.0,
            4.0 / 3.0,
            8.0,
            10.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularPotential {
    pub lo: f64,
    pub hi: f64,
    /// Yosida parameter.
    pub n: f64,
    /// Quadratic perturbation `Λ`.
    pub lambda: Polynomial,
}

impl SingularPotential {
    /// Double obstacle on `[-1, 1]` with `Λ(y) = (1 - y²)/2`.
    pub fn double_obstacle(n: f64) -> Self {
        Self { lo: -1.0, hi: 1.0, n, lambda: Polynomial(vec![0.5, 0.0, -0.5]) }
    }

    /// Resolvent `(I + n β)⁻¹`: projection onto the obstacle interval.
    pub fn resolvent(&self, y: f64) -> f64 {
        y.clamp(self.lo, self.hi)
    }

    /// `βₙ(y) = (y - clamp(y)) / n`.
    pub fn yosida_beta(&self, y: f64) -> f64 {
        (y - self.resolvent(y)) / self.n
    }

    /// `β̂ₙ(y) = dist(y, [lo, hi])² / (2n)`.
    pub fn yosida_beta_hat(&self, y: f64) -> f64 {
        let d = y - self.resolvent(y);
        d * d / (2.0 * self.n)
    }

    /// Slope of `βₙ`; the one-sided value from outside is used at the kinks.
    pub fn yosida_beta_slope(&self, y: f64) -> f64 {
        if y < self.lo || y > self.hi {
            1.0 / self.n
        } else {
            0.0
        }
    }

    pub fn lambda(&self, y: f64) -> f64 {
        self.lambda.eval(y)
    }

    pub fn lambda_prime(&self, y: f64) -> f64 {
        self.lambda.eval_derivative(y)
    }

    /// `sup |Λ''|`; finite because `Λ` is at most quadratic (checked by `validate`).
    pub fn lambda_second_bound(&self) -> f64 {
        (self.lambda.0.get(2).copied().unwrap_or(0.0) * 2.0).abs()
    }

    /// Distance outside the obstacle, `max(0, y - hi, lo - y)`.
    pub fn violation(&self, y: f64) -> f64 {
        (y - self.hi).max(self.lo - y).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Regular(RegularPotential),
    Singular(SingularPotential),
}

impl Potential {
    pub fn quartic() -> Self {
        Potential::Regular(RegularPotential::quartic())
    }

    pub fn double_obstacle(n: f64) -> Self {
        Potential::Singular(SingularPotential::double_obstacle(n))
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Potential::Singular(_))
    }

    pub fn as_singular(&self) -> Option<&SingularPotential> {
        match self {
            Potential::Singular(s) => Some(s),
            Potential::Regular(_) => None,
        }
    }

    /// Copy with a different Yosida parameter; regular potentials are returned unchanged.
    pub fn with_yosida_n(&self, n: f64) -> Self {
        match self {
            Potential::Singular(s) => Potential::Singular(SingularPotential { n, ..s.clone() }),
            other => other.clone(),
        }
    }

    pub fn psi(&self, y: f64) -> f64 {
        match self {
            Potential::Regular(r) => r.convex.eval(y) + r.concave.eval(y),
            Potential::Singular(s) => s.yosida_beta_hat(y) + s.lambda(y),
        }
    }

    pub fn psi_prime(&self, y: f64) -> f64 {
        self.psi1_prime(y) + self.psi2_prime(y)
    }

    /// Derivative of the implicitly treated convex part.
    pub fn psi1_prime(&self, y: f64) -> f64 {
        match self {
            Potential::Regular(r) => r.derived.convex_d1.eval(y),
            Potential::Singular(s) => s.yosida_beta(y),
        }
    }

    /// Derivative of the explicitly treated part.
    pub fn psi2_prime(&self, y: f64) -> f64 {
        match self {
            Potential::Regular(r) => r.derived.concave_d1.eval(y),
            Potential::Singular(s) => s.lambda_prime(y),
        }
    }

    pub fn psi1_second(&self, y: f64) -> f64 {
        match self {
            Potential::Regular(r) => r.derived.convex_d2.eval(y),
            Potential::Singular(s) => s.yosida_beta_slope(y),
        }
    }

    /// Checks (A3) for regular and (S1)/(S2) for singular potentials by sampling.
    pub fn validate(&self) -> Vec<Violation> {
        match self {
            Potential::Regular(r) => validate_regular(r),
            Potential::Singular(s) => validate_singular(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub label: String,
    pub message: String,
}

impl Violation {
    pub fn new(label: &str, message: impl Into<String>) -> Self {
        Self { label: label.to_string(), message: message.into() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.label, self.message)
    }
}

const SAMPLE_LO: f64 = -10.0;
const SAMPLE_HI: f64 = 10.0;
const SAMPLES: usize = 10_000;

fn sample_points(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

fn validate_regular(r: &RegularPotential) -> Vec<Violation> {
    let mut out = Vec::new();
    let pot = Potential::Regular(r.clone());
    if let Some(y) = sample_points(SAMPLE_LO, SAMPLE_HI, SAMPLES).find(|&y| pot.psi(y) < -1e-12) {
        out.push(Violation::new("(A3)", format!("potential is negative at y = {y}: {}", pot.psi(y))));
    }
    if let Some(y) = sample_points(SAMPLE_LO, SAMPLE_HI, SAMPLES).find(|&y| r.derived.convex_d2.eval(y) < -1e-12) {
        out.push(Violation::new("(A3)", format!("convex part has negative curvature {} at y = {y}", r.derived.convex_d2.eval(y))));
    }
    if r.concave.degree().unwrap_or(0) > 2 {
        out.push(Violation::new("(A3)", "concave part must be at most quadratic (constant second derivative)"));
    }
    if !(r.growth_s > 1.0 && r.growth_s <= 2.0) || !(r.growth_k1 > 0.0) {
        out.push(Violation::new("(A3)", format!("growth exponent s = {} must lie in (1, 2] with k1 > 0", r.growth_s)));
    } else if let Some(y) = sample_points(SAMPLE_LO, SAMPLE_HI, SAMPLES)
        .find(|&y| pot.psi_prime(y).abs().powf(r.growth_s) > r.growth_k1 * (1.0 + pot.psi(y)) * (1.0 + 1e-12))
    {
        out.push(Violation::new("(A3)", format!("growth bound |Ψ'|^s <= k1 (1 + Ψ) fails at y = {y}")));
    }
    out
}

fn validate_singular(s: &SingularPotential) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(s.n > 0.0 && s.n <= 1.0) {
        out.push(Violation::new("(S1)", format!("Yosida parameter n = {} must lie in (0, 1]", s.n)));
    }
    if !(s.lo < s.hi) {
        out.push(Violation::new("(S1)", format!("empty obstacle interval [{}, {}]", s.lo, s.hi)));
    }
    if !(s.lo <= -1.0 && -1.0 <= s.hi) {
        out.push(Violation::new("(S1)", format!("-1 must lie in D(β) = [{}, {}]", s.lo, s.hi)));
    }
    if !(s.lo <= 0.0 && 0.0 <= s.hi) {
        out.push(Violation::new("(S1)", format!("β̂(0) = 0 requires 0 in [{}, {}]", s.lo, s.hi)));
    }
    if s.lambda.degree().unwrap_or(0) > 2 {
        out.push(Violation::new("(S2)", "Λ must be at most quadratic so that Λ'' is bounded"));
    }
    if s.lo < s.hi {
        if let Some(y) = sample_points(s.lo, s.hi, 1001).find(|&y| s.lambda(y) < -1e-12) {
            out.push(Violation::new("(S2)", format!("Λ is negative at y = {y} inside the obstacle")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force `min_s (s - y)² / (2n)` over a fine grid of `s ∈ [-1, 1]`.
    fn moreau_oracle(n: f64, y: f64) -> (f64, f64) {
        let m = 200_001;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..m {
            let s = -1.0 + 2.0 * k as f64 / (m - 1) as f64;
            let v = (s - y).powi(2) / (2.0 * n);
            if v < best.0 {
                best = (v, s);
            }
        }
        best
    }

    #[test]
    fn quartic_values() {
        let p = Potential::quartic();
        assert_eq!(p.psi(0.0), 1.0);
        assert_eq!(p.psi(1.0), 0.0);
        assert_eq!(p.psi(-1.0), 0.0);
        // d/ds (s²-1)² = 4 s (s² - 1)
        assert_eq!(p.psi_prime(2.0), 24.0);
        assert_eq!(p.psi_prime(1.0), 0.0);
        assert_eq!(p.psi_prime(-1.0), 0.0);
        for y in [-2.3, -0.4, 0.0, 0.7, 3.1] {
            assert_eq!(p.psi_prime(y), p.psi1_prime(y) + p.psi2_prime(y));
            let w = (y * y - 1.0f64).powi(2);
            assert!((p.psi(y) - w).abs() < 1e-12 * w.max(1.0));
        }
        assert!(p.validate().is_empty(), "{:?}", p.validate());
    }

    #[test]
    fn non_convex_split_is_reported() {
        let bad = Potential::Regular(RegularPotential::new(
            Polynomial(vec![1.0, 0.0, -1.0, 0.0, 1.0]),
            Polynomial(vec![0.0, 0.0, -1.0]),
            3.0,
            4.0 / 3.0,
            8.0,
            10.0,
        ));
        let v = bad.validate();
        assert!(v.iter().any(|v| v.label == "(A3)" && v.message.contains("curvature")), "{v:?}");
        let neg = Potential::Regular(RegularPotential::new(
            Polynomial(vec![0.0, 0.0, 0.0]),
            Polynomial(vec![0.0, 0.0, -1.0]),
            1.0,
            2.0,
            10.0,
            1.0,
        ));
        assert!(neg.validate().iter().any(|v| v.message.contains("negative at")));
    }

    #[test]
    fn yosida_closed_form_matches_minimisation_oracle() {
        let s = SingularPotential::double_obstacle(0.1);
        assert_eq!(s.yosida_beta(0.0), 0.0);
        assert!((s.yosida_beta(1.5) - 5.0).abs() < 1e-12);
        assert!((s.yosida_beta(-1.1) + 1.0).abs() < 1e-12);
        let (val, arg) = moreau_oracle(0.1, 1.5);
        assert!((arg - 1.0).abs() < 1e-9);
        assert!(((1.5 - arg) / 0.1 - s.yosida_beta(1.5)).abs() < 1e-8);
        assert!((val - s.yosida_beta_hat(1.5)).abs() < 1e-9);
        let (_, arg) = moreau_oracle(0.1, -1.1);
        assert!(((-1.1 - arg) / 0.1 - s.yosida_beta(-1.1)).abs() < 1e-8);

        let s2 = SingularPotential::double_obstacle(0.5);
        let (v2, _) = moreau_oracle(0.5, 2.0);
        assert!((v2 - 1.0).abs() < 1e-9);
        assert!((s2.yosida_beta_hat(2.0) - 1.0).abs() < 1e-15);
        for y in [-1.0, -0.3, 0.0, 0.99, 1.0] {
            assert_eq!(s2.yosida_beta_hat(y), 0.0);
        }
        assert!(SingularPotential::double_obstacle(0.1).yosida_beta_hat(1.5) > SingularPotential::double_obstacle(0.2).yosida_beta_hat(1.5));
    }

    #[test]
    fn lambda_prime_of_default_perturbation() {
        let s = SingularPotential::double_obstacle(0.1);
        assert_eq!(s.lambda_prime(0.0), 0.0);
        assert_eq!(s.lambda_prime(0.5), -0.5);
        assert_eq!(s.lambda_prime(-1.0), 1.0);
        assert_eq!(s.lambda_second_bound(), 1.0);
    }

    #[test]
    fn obstacle_validation() {
        assert!(Potential::double_obstacle(0.01).validate().is_empty());
        let bad = Potential::Singular(SingularPotential { lo: -3.0, hi: -1.5, ..SingularPotential::double_obstacle(0.1) });
        assert!(bad.validate().iter().any(|v| v.label == "(S1)" && v.message.contains("-1 must lie")));
        assert!(!Potential::double_obstacle(0.0).validate().is_empty());
        let cubic = Potential::Singular(SingularPotential {
            lambda: Polynomial(vec![0.0, 0.0, 0.0, 1.0]),
            ..SingularPotential::double_obstacle(0.1)
        });
        assert!(cubic.validate().iter().any(|v| v.label == "(S2)"));
    }

    #[test]
    fn yosida_invariants_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[1.0, 0.1, 0.01, 1e-3] {
            let s = SingularPotential::double_obstacle(n);
            for _ in 0..10_000 {
                let a: f64 = rng.gen_range(-3.0..3.0);
                let b: f64 = rng.gen_range(-3.0..3.0);
                let (ba, bb) = (s.yosida_beta(a), s.yosida_beta(b));
                assert!((ba - bb) * (a - b) >= 0.0);
                assert!((ba - bb).abs() <= (a - b).abs() / n * (1.0 + 1e-12));
                if (a > 1.0 && b > 1.0) || (a < -1.0 && b < -1.0) {
                    assert!(((ba - bb).abs() - (a - b).abs() / n).abs() <= 1e-9 * (a - b).abs() / n);
                }
                // exact up to the rounding of (y - J y) / n * n
                assert!((a - (s.resolvent(a) + n * ba)).abs() <= 2.0 * f64::EPSILON * a.abs());
            }
        }
    }

    #[test]
    fn beta_is_derivative_of_beta_hat() {
        let s = SingularPotential::double_obstacle(0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 1000 {
            let y: f64 = rng.gen_range(-3.0..3.0);
            if (y.abs() - 1.0).abs() < 1e-3 {
                continue;
            }
            let d = 1e-6;
            let fd = (s.yosida_beta_hat(y + d) - s.yosida_beta_hat(y - d)) / (2.0 * d);
            let b = s.yosida_beta(y);
            assert!((fd - b).abs() <= 1e-6 * b.abs().max(1.0), "y={y} fd={fd} b={b}");
            checked += 1;
        }
    }

    #[test]
    fn polynomial_helpers() {
        let p = Polynomial(vec![1.0, -2.0, 0.0, 4.0, 0.0]);
        assert_eq!(p.degree(), Some(3));
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 32.0);
        assert_eq!(p.derivative().0, vec![-2.0, 0.0, 12.0, 0.0]);
        assert_eq!(p.eval_derivative(1.5), p.derivative().eval(1.5));
        assert_eq!(Polynomial(vec![0.0]).degree(), None);
    }
}
