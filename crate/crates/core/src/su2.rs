//! Schwinger-oscillator SU(2) machinery for one interaction window.
//!
//! With J₊ = a₁†a₂ and J₃ = (n₁ − n₂)/2 the evolved joint state is, up to a
//! scalar in j, the conjugated rotation
//!
//! ```text
//! e^{-i(a J₃ + b J₁)} e^{-i c J₃} e^{+i(a J₃ + b J₁)}
//! ```
//!
//! with a = τ(ω₁ − ω₂), b = 2ωλτ and c = i(ω₂θ₂ − ω₁θ₁). In the j = ½
//! representation this element is `A·I − i(B σ₁ + C σ₂ + D σ₃)`, and its
//! Euler-angle form `e^{-iαJ₃} e^{-iβJ₂} e^{-iγJ₃}` feeds the closed-form
//! temperature update. Only cos(β/2) and δ = (α + γ)/(2i) reach the physics.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{SystemParams, ThermalState};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Below this |d| the ratios sin(d)/d use their Taylor series.
const SMALL_D: f64 = 1e-8;

/// Relative reconstruction error above which [`compute_euler`] reports a
/// branch problem.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Relative imaginary residue tolerated on quantities that must be real.
pub const REALNESS_TOL: f64 = 1e-12;

type C2 = Matrix2<Complex64>;

/// Per-window coefficients of the conjugated rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    /// τ(ω₁ − ω₂)
    pub a: f64,
    /// 2ωλτ
    pub b: f64,
    /// i(ω₂θ₂ − ω₁θ₁); the real part is exactly zero.
    pub c: Complex64,
    /// √((a/2)² + (b/2)²), half the rotation angle φ.
    pub d: f64,
}

impl StepCoefficients {
    pub fn from_parts(a: f64, b: f64, c: Complex64) -> Self {
        Self {
            a,
            b,
            c,
            d: (0.5 * a).hypot(0.5 * b),
        }
    }
}

pub fn compute_step_coefficients(
    params: &SystemParams,
    state: &ThermalState,
) -> Result<StepCoefficients> {
    params.validate()?;
    state.validate()?;
    let a = params.tau * (params.omega1 - params.omega2);
    let b = 2.0 * params.coupling() * params.tau;
    let g = params.omega2 * state.theta2 - params.omega1 * state.theta1;
    for (field, value) in [("a", a), ("b", b), ("c", g)] {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                field,
                value,
                reason: "step coefficient is not finite",
            });
        }
    }
    Ok(StepCoefficients::from_parts(a, b, Complex64::new(0.0, g)))
}

/// The SU(2) element `A·I − i(B σ₁ + C σ₂ + D σ₃)` in quaternion form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcdIntermediates {
    /// A = cos(c/2)
    pub scalar: Complex64,
    /// B = (ab / 2d²) sin²(d) sin(c/2)
    pub x: Complex64,
    /// C = −(b/d) cos(d) sin(d) sin(c/2)
    pub y: Complex64,
    /// D = [cos²(d) + ((a/2)² − (b/2)²) sin²(d)/d²] sin(c/2)
    pub z: Complex64,
}

/// sin(d)/d with the removable singularity filled in.
fn sinc(d: f64) -> f64 {
    if d.abs() < SMALL_D {
        1.0 - d * d / 6.0
    } else {
        d.sin() / d
    }
}

pub fn compute_abcd(coeffs: &StepCoefficients) -> AbcdIntermediates {
    let StepCoefficients { a, b, c, d } = *coeffs;
    let half_c = 0.5 * c;
    let s = half_c.sin();
    let sinc_d = sinc(d);
    let sinc2 = sinc_d * sinc_d;
    let (ha, hb) = (0.5 * a, 0.5 * b);
    AbcdIntermediates {
        scalar: half_c.cos(),
        x: s * (0.5 * a * b * sinc2),
        y: s * (-b * d.cos() * sinc_d),
        z: s * (d.cos().powi(2) + (ha * ha - hb * hb) * sinc2),
    }
}

/// Euler angles of the conjugated rotation and the two combinations that
/// survive into the reduced density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDecomposition {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    /// cos(β/2) = √(A² + D²), ≥ 1 for imaginary c.
    pub cos_beta_half: f64,
    /// δ = ½(ζ + ξ) where α = iζ, γ = iξ; equals −i·arctan(D/A).
    pub delta: f64,
    /// φ/2 = d.
    pub phi_half: f64,
}

/// Extracts the Euler angles from the quaternion form.
///
/// α ± γ are split as `2·arctan(D/A)` and `2ψ`, where ψ is the phase of
/// `(C − iB)/sin(β/2)`. For purely imaginary B, C this is the two-argument
/// arctangent of −B/C; it is set to zero when B = C = 0. The result is checked
/// by rebuilding both sides of the identity on 2×2 matrices. For imaginary c
/// the arctangent is taken through [`realified`].
pub fn compute_euler(
    coeffs: &StepCoefficients,
    abcd: &AbcdIntermediates,
) -> Result<EulerDecomposition> {
    let AbcdIntermediates {
        scalar: a,
        x: b,
        y: c,
        z: d,
    } = *abcd;
    if a.norm() == 0.0 {
        return Err(Error::BranchAmbiguity {
            error: f64::INFINITY,
            dump: format!("A = 0; {}", dump(coeffs, abcd)),
        });
    }
    let (half_sum, cos_beta_half) = if coeffs.c.re == 0.0 {
        // arctan(D/A) cancels badly when D/A ≈ ∓i (large |c| with K ≈ ±1)
        let (cbh, delta) = realified(coeffs);
        (I * delta, Complex64::new(cbh, 0.0))
    } else {
        let half_sum = (d / a).atan();
        (half_sum, a / half_sum.cos())
    };
    // sin²(β/2) = B² + C² since the element has unit determinant; taking the
    // angle from both cos and sin avoids the ill-conditioned arccos near 1.
    let sin_beta_half = (b * b + c * c).sqrt();
    let (plus, minus) = (
        cos_beta_half + I * sin_beta_half,
        cos_beta_half - I * sin_beta_half,
    );
    // plus·minus = 1, so ln(plus) = −ln(minus); use the side without cancellation
    let beta = if plus.norm() >= minus.norm() {
        -2.0 * I * plus.ln()
    } else {
        2.0 * I * minus.ln()
    };

    let half_diff = if b == ZERO && c == ZERO {
        ZERO
    } else if sin_beta_half.norm() > 0.0 {
        -I * ((c - I * b) / sin_beta_half).ln()
    } else {
        (-b / c).atan()
    };

    let delta_c = -I * half_sum;
    let residue = [
        (cos_beta_half, "cos(beta/2)"),
        (delta_c, "delta"),
    ]
    .into_iter()
    .map(|(v, name)| (v.im.abs() / v.re.abs().max(1.0), name))
    .fold((0.0, ""), |acc, x| if x.0 > acc.0 { x } else { acc });
    if residue.0 > REALNESS_TOL {
        return Err(Error::NotReal {
            quantity: residue.1,
            residue: residue.0,
        });
    }

    let euler = EulerDecomposition {
        alpha: half_sum + half_diff,
        beta,
        gamma: half_sum - half_diff,
        cos_beta_half: cos_beta_half.re,
        delta: delta_c.re,
        phi_half: coeffs.d,
    };

    let err = su2_reconstruction_error(coeffs, &euler);
    let scale = conjugated_rotation(coeffs)
        .iter()
        .map(|z| z.norm())
        .fold(1.0, f64::max);
    if !(err <= RECONSTRUCTION_TOL * scale) {
        return Err(Error::BranchAmbiguity {
            error: err,
            dump: dump(coeffs, abcd),
        });
    }
    Ok(euler)
}

/// cos(β/2) and δ evaluated with real hyperbolic functions.
///
/// For c = ig the quaternion has A = cosh(g/2) and D = i·D̃ with
/// D̃ = K sinh(g/2), so cos(β/2) = √(A² − D̃²) and δ = artanh(D̃/A).
/// Both are formed from 1 ∓ K directly, which stays accurate when |K| → 1
/// and |g| is large.
pub fn realified(coeffs: &StepCoefficients) -> (f64, f64) {
    let x = 0.5 * coeffs.c.im;
    let (ha, hb) = (0.5 * coeffs.a, 0.5 * coeffs.b);
    let d = coeffs.d;
    let s = hb * sinc(d);
    // K = 1 − 2(hb·sinc d)² and 1 + K = 2(ha² + hb² cos² d)/d²
    let one_minus_k = 2.0 * s * s;
    let one_plus_k = if d.abs() < SMALL_D {
        2.0 - one_minus_k
    } else {
        2.0 * (ha * ha + (hb * d.cos()).powi(2)) / (d * d)
    };
    let sh = x.sinh();
    let cbh2 = 1.0 + one_minus_k * one_plus_k * sh * sh;
    // A ∓ D̃; the one that can cancel is recovered from the product cbh²
    let (minus, plus) = if x >= 0.0 {
        let m = (-x).exp() + one_minus_k * sh;
        (m, cbh2 / m)
    } else {
        let p = x.exp() - one_minus_k * sh;
        (cbh2 / p, p)
    };
    (cbh2.sqrt(), 0.5 * (plus / minus).ln())
}

fn dump(coeffs: &StepCoefficients, abcd: &AbcdIntermediates) -> String {
    format!(
        "a = {:e}, b = {:e}, c = {:e}, d = {:e}, A = {}, B = {}, C = {}, D = {}",
        coeffs.a, coeffs.b, coeffs.c, coeffs.d, abcd.scalar, abcd.x, abcd.y, abcd.z
    )
}

// --- 2×2 matrix oracle -------------------------------------------------------

fn pauli() -> [C2; 3] {
    [
        C2::new(ZERO, ONE, ONE, ZERO),
        C2::new(ZERO, -I, I, ZERO),
        C2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

/// Spin-½ generators J_k = σ_k / 2.
fn spin_half() -> [C2; 3] {
    pauli().map(|s| s * Complex64::new(0.5, 0.0))
}

fn max_abs(m: &C2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub(crate) fn expm2(m: &C2) -> C2 {
    let norm = m.iter().map(|z| z.norm()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = m * Complex64::new(scale, 0.0);
    let mut term = C2::identity();
    let mut acc = C2::identity();
    for k in 1..=20 {
        term = term * x * Complex64::new(1.0 / k as f64, 0.0);
        acc += term;
    }
    for _ in 0..squarings {
        acc = acc * acc;
    }
    acc
}

fn conjugated_rotation(coeffs: &StepCoefficients) -> C2 {
    let [j1, _, j3] = spin_half();
    let gen = j3 * Complex64::new(coeffs.a, 0.0) + j1 * Complex64::new(coeffs.b, 0.0);
    expm2(&(gen * -I)) * expm2(&(j3 * (-I * coeffs.c))) * expm2(&(gen * I))
}

fn euler_product(euler: &EulerDecomposition) -> C2 {
    let [_, j2, j3] = spin_half();
    expm2(&(j3 * (-I * euler.alpha)))
        * expm2(&(j2 * (-I * euler.beta)))
        * expm2(&(j3 * (-I * euler.gamma)))
}

/// Max entrywise difference between the conjugated rotation and its Euler
/// form on the j = ½ representation, both built by brute-force exponentials.
pub fn su2_reconstruction_error(coeffs: &StepCoefficients, euler: &EulerDecomposition) -> f64 {
    max_abs(&(conjugated_rotation(coeffs) - euler_product(euler)))
}

/// Quaternion form assembled as a 2×2 matrix, `A·I − i(Bσ₁ + Cσ₂ + Dσ₃)`.
pub fn quaternion_matrix(abcd: &AbcdIntermediates) -> Matrix2<Complex64> {
    let [s1, s2, s3] = pauli();
    C2::identity() * abcd.scalar - (s1 * abcd.x + s2 * abcd.y + s3 * abcd.z) * I
}

/// Brute-force j = ½ matrix of the conjugated rotation.
pub fn conjugated_rotation_matrix(coeffs: &StepCoefficients) -> Matrix2<Complex64> {
    conjugated_rotation(coeffs)
}

// --- Wigner d --------------------------------------------------------------

/// A half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInteger(pub i32);

impl HalfInteger {
    pub fn from_twice(twice: i32) -> Self {
        Self(twice)
    }

    pub fn integer(n: i32) -> Self {
        Self(2 * n)
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) * 0.5
    }

    pub fn twice(self) -> i32 {
        self.0
    }
}

fn ln_factorial(n: i32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// Wigner's d^{(j)}_{m′m}(β) = ⟨j m′| e^{−iβJ₂} |j m⟩ by the factorial sum.
///
/// Factorials are combined in log space. β may be complex; the relaxation path
/// produces imaginary β.
pub fn wigner_d(
    j: HalfInteger,
    m_prime: HalfInteger,
    m: HalfInteger,
    beta: Complex64,
) -> Result<Complex64> {
    let invalid = || Error::InvalidAngularMomentum {
        j: j.value(),
        m_prime: m_prime.value(),
        m: m.value(),
    };
    let (j2, mp2, m2) = (j.0, m_prime.0, m.0);
    if j2 < 0 || mp2.abs() > j2 || m2.abs() > j2 || (j2 - m2) % 2 != 0 || (j2 - mp2) % 2 != 0 {
        return Err(invalid());
    }
    let jpm = (j2 + m2) / 2;
    let jmm = (j2 - m2) / 2;
    let jpmp = (j2 + mp2) / 2;
    let jmmp = (j2 - mp2) / 2;
    let dm = (mp2 - m2) / 2;

    let norm = 0.5 * (ln_factorial(jpm) + ln_factorial(jmm) + ln_factorial(jpmp) + ln_factorial(jmmp));
    let cos_h = (0.5 * beta).cos();
    let sin_h = (0.5 * beta).sin();

    let k_min = 0.max(-dm);
    let k_max = jmmp.min(jpm);
    let mut sum = ZERO;
    for k in k_min..=k_max {
        let ln_mag = norm
            - ln_factorial(jmmp - k)
            - ln_factorial(k)
            - ln_factorial(jpm - k)
            - ln_factorial(k + dm);
        let sign = if (k + dm).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let cos_pow = (j2 - dm - 2 * k) as u32;
        let sin_pow = (2 * k + dm) as u32;
        sum += cos_h.powu(cos_pow) * sin_h.powu(sin_pow) * (sign * ln_mag.exp());
    }
    Ok(sum)
}

/// Full (2j+1)×(2j+1) d-matrix, rows and columns ordered m = j, j−1, …, −j.
pub fn wigner_d_matrix(j: HalfInteger, beta: Complex64) -> Result<nalgebra::DMatrix<Complex64>> {
    let n = (j.0 + 1) as usize;
    let label = |i: usize| HalfInteger(j.0 - 2 * i as i32);
    let mut out = nalgebra::DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(r, c)] = wigner_d(j, label(r), label(c), beta)?;
        }
    }
    Ok(out)
}
