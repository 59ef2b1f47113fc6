//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

fn factorial(k: u32) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * i)
}

fn binomial(n: u32, k: u32) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn rat(n: BigInt) -> BigRational {
    BigRational::from_integer(n)
}

/// Coefficients of P with R_nl ∝ r^l e^{−r/n} P(r), leading term positive.
fn laguerre_poly(n: u32, l: u32) -> Vec<BigRational> {
    let nr = n - l - 1;
    let two_over_n = BigRational::new(BigInt::from(2), BigInt::from(n));
    (0..=nr)
        .map(|j| {
            let sign = if (j + nr) % 2 == 0 { 1 } else { -1 };
            let mut c = rat(binomial(nr + 2 * l + 1, nr - j) * sign) / rat(factorial(j));
            for _ in 0..j {
                c *= &two_over_n;
            }
            c
        })
        .collect()
}

/// ∫ r^{2+extra} R_a R_b dr without normalization, exact.
fn overlap(na: u32, la: u32, nb: u32, lb: u32, extra: u32) -> BigRational {
    let pa = laguerre_poly(na, la);
    let pb = laguerre_poly(nb, lb);
    let s = BigRational::new(BigInt::from(na + nb), BigInt::from(na * nb));
    let mut total = BigRational::zero();
    for (j, a) in pa.iter().enumerate() {
        for (k, b) in pb.iter().enumerate() {
            let power = la + lb + 2 + extra + j as u32 + k as u32;
            let mut term = a * b * rat(factorial(power));
            for _ in 0..=power {
                term /= &s;
            }
            total += term;
        }
    }
    total
}

/// ⟨n l | r | n' l'⟩ from exact polynomial integration; only the final
/// square root is taken in floating point.
pub fn exact_radial_dipole(n: u32, l: u32, n2: u32, l2: u32) -> f64 {
    let i = overlap(n, l, n2, l2, 1);
    let na = overlap(n, l, n, l, 0);
    let nb = overlap(n2, l2, n2, l2, 0);
    let ratio = (&i * &i) / (na * nb);
    let magnitude = ratio.to_f64().expect("finite").sqrt();
    if i.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

/// Twenty low-n pairs (n, l, n', l') with n, n' ≤ 10 and |l − l'| = 1.
pub const RADIAL_TABLE: [(u32, u32, u32, u32); 20] = [
    (1, 0, 2, 1),
    (1, 0, 3, 1),
    (2, 0, 3, 1),
    (2, 1, 3, 0),
    (2, 1, 3, 2),
    (3, 2, 4, 3),
    (3, 1, 4, 2),
    (3, 0, 5, 1),
    (4, 3, 5, 4),
    (4, 2, 6, 1),
    (5, 4, 6, 3),
    (5, 2, 7, 3),
    (6, 5, 7, 6),
    (6, 3, 8, 2),
    (7, 6, 8, 5),
    (7, 1, 9, 0),
    (8, 7, 9, 8),
    (8, 4, 10, 5),
    (9, 8, 10, 9),
    (10, 9, 10, 8),
];

/// Largest relative deviation of the quadrature integrals from the oracle.
pub fn radial_table_error() -> f64 {
    RADIAL_TABLE
        .iter()
        .map(|&(n, l, n2, l2)| {
            let got = mwion_core::stark::radial_dipole(n, l, n2, l2).expect("valid pair");
            let want = exact_radial_dipole(n, l, n2, l2);
            ((got - want) / want).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest relative deviation of the uphill diagonal ⟨z⟩ from (3/2)n(n1 − n2)
/// for n = 30…100 at the given m.
pub fn diagonal_error(m: i32) -> f64 {
    use mwion_core::stark::{dipole_element, extremal_state};
    (30..=100u32)
        .filter(|&n| n > m.unsigned_abs())
        .map(|n| {
            let s = extremal_state(n, m).expect("state");
            let want = 1.5 * f64::from(n) * (f64::from(s.n1) - f64::from(s.n2));
            let got = dipole_element(&s, &s).expect("element");
            ((got - want) / want).abs()
        })
        .fold(0.0, f64::max)
}

/// Small, fast configuration: n0 = 10 in a 6…20 basis, five cycles at a
/// drive frequency near the Kepler frequency, both methods.
pub fn toy_config() -> mwion_core::sweep::SweepConfig {
    use mwion_core::quantum::EnvelopeParams;
    use mwion_core::sweep::{ConvergenceConfig, FieldGrid, MethodSet, SweepConfig};
    SweepConfig {
        n0: 10,
        grid: FieldGrid { lo: 60_000.0, hi: 66_000.0, step: 2_000.0 },
        m0_set: vec![0, 3],
        methods: MethodSet::Both,
        basis_n_min: 6,
        basis_n_max: 20,
        n_cut: 16,
        frequency_ghz: 6_580.0,
        envelope: EnvelopeParams { t_on: 1.0, w_on: 0.25, t_off: 4.0, w_off: 0.25 },
        total_cycles: 5.0,
        steps_per_cycle: 200,
        trajectories: 8,
        convergence: Some(ConvergenceConfig { m0: 0, n_max: 24, grid: FieldGrid { lo: 62_000.0, hi: 64_000.0, step: 2_000.0 } }),
        ..SweepConfig::preset_n37()
    }
}

/// Coefficients of L_k^α(x/n) as a polynomial in x.
fn laguerre_scaled(k: u32, alpha: u32, n: u32) -> Vec<BigRational> {
    (0..=k)
        .map(|j| {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            let c = rat(binomial(k + alpha, k - j) * sign) / rat(factorial(j));
            c / rat(BigInt::from(n).pow(j))
        })
        .collect()
}

/// ∫₀^∞ x^{extra+|m|} L_a(x/na) L_b(x/nb) e^{−s x} dx with s = (na + nb)/(2 na nb).
fn parabolic_moment(ka: u32, na: u32, kb: u32, nb: u32, am: u32, extra: u32) -> BigRational {
    let pa = laguerre_scaled(ka, am, na);
    let pb = laguerre_scaled(kb, am, nb);
    let s = BigRational::new(BigInt::from(na + nb), BigInt::from(2 * na * nb));
    let mut total = BigRational::zero();
    for (j, a) in pa.iter().enumerate() {
        for (k, b) in pb.iter().enumerate() {
            let p = am + extra + j as u32 + k as u32;
            let mut term = a * b * rat(factorial(p));
            for _ in 0..=p {
                term /= &s;
            }
            total += term;
        }
    }
    total
}

/// ⟨n n1 n2 m| z |n' n1' n2' m⟩ by exact integration in parabolic
/// coordinates, z = (ξ − η)/2, dV = (ξ + η)/4 dξ dη dφ. The overall sign of
/// each state is arbitrary here; compare magnitudes and closed-loop products.
pub fn exact_parabolic_z(a: (u32, u32, u32), b: (u32, u32, u32), m: i32) -> f64 {
    let am = m.unsigned_abs();
    let (na, a1, a2) = a;
    let (nb, b1, b2) = b;
    let xi = |e: u32| parabolic_moment(a1, na, b1, nb, am, e);
    let eta = |e: u32| parabolic_moment(a2, na, b2, nb, am, e);
    let num = xi(2) * eta(0) - xi(0) * eta(2);
    let norm = |n: u32, k1: u32, k2: u32| {
        parabolic_moment(k1, n, k1, n, am, 1) * parabolic_moment(k2, n, k2, n, am, 0)
            + parabolic_moment(k1, n, k1, n, am, 0) * parabolic_moment(k2, n, k2, n, am, 1)
    };
    // (1/8)·num / sqrt((1/4)·Na · (1/4)·Nb) = num / (2 sqrt(Na Nb))
    let ratio = (&num * &num) / (norm(na, a1, a2) * norm(nb, b1, b2) * rat(BigInt::from(4)));
    let magnitude = ratio.to_f64().expect("finite").sqrt();
    if num.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}
