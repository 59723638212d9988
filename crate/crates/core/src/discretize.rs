//! Zero-order-hold discretization through the matrix exponential.

use nalgebra::DMatrix;

use crate::error::{check_dim, invalid, ModelError, Result};

// Padé degrees with the 1-norm bounds below which they reach unit roundoff
// (Higham, scaling and squaring revisited).
const PADE: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        13 => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
        _ => unreachable!(),
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(invalid("matrix", "must be square"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = norm1(m);
    let (degree, scale) = match PADE.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(d, _)) => (d, 0),
        None => {
            let s = (norm / PADE[4].1).log2().ceil().max(0.0) as i32;
            (13, s)
        }
    };
    let a = m * 2f64.powi(-scale);
    let b = pade_coefficients(degree);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;

    let (u, v) = if degree < 13 {
        // powers A^0, A^2, A^4, ...
        let mut powers = vec![ident.clone(), a2.clone()];
        while powers.len() <= degree / 2 {
            let next = powers.last().unwrap() * &a2;
            powers.push(next);
        }
        let mut u_even = DMatrix::zeros(n, n);
        let mut v = DMatrix::zeros(n, n);
        for k in 0..=degree / 2 {
            u_even += &powers[k] * b[2 * k + 1];
            v += &powers[k] * b[2 * k];
        }
        (&a * u_even, v)
    } else {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
        let u = &a * (u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
        let v_inner = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
        let v = v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
        (u, v)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or_else(|| ModelError::Singular { context: "Padé denominator".into() })?;
    for _ in 0..scale {
        r = &r * &r;
    }
    Ok(r)
}

/// Discrete system matrices for inputs held constant over each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

/// Exact ZOH discretization of `dx/dt = A x + B u + E d` with step `dt`.
///
/// Uses one exponential of the augmented matrix `[[A, B, E], [0, 0, 0]] * dt`;
/// the top row of the result holds `(A_d, B_d, E_d)`.
pub fn zoh_discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, e: &DMatrix<f64>, dt: f64) -> Result<DiscreteSystem> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", "sample time must be positive"));
    }
    if !a.is_square() {
        return Err(invalid("A", "must be square"));
    }
    let n = a.nrows();
    check_dim("B rows", n, b.nrows())?;
    check_dim("E rows", n, e.nrows())?;
    let (nb, ne) = (b.ncols(), e.ncols());
    let size = n + nb + ne;
    let mut aug = DMatrix::zeros(size, size);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, nb)).copy_from(&(b * dt));
    aug.view_mut((0, n + nb), (n, ne)).copy_from(&(e * dt));
    let ex = expm(&aug)?;
    Ok(DiscreteSystem {
        a: ex.view((0, 0), (n, n)).clone_owned(),
        b: ex.view((0, n), (n, nb)).clone_owned(),
        e: ex.view((0, n + nb), (n, ne)).clone_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Truncated Taylor series evaluated with scaling and squaring; independent
    /// of the Padé path.
    fn taylor_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let s = (norm1(m).max(1e-300).log2().ceil() + 4.0).max(0.0) as i32;
        let a = m * 2f64.powi(-s);
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let r = expm(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(r, DMatrix::identity(3, 3));
    }

    #[test]
    fn exp_of_minus_identity() {
        let r = expm(&DMatrix::from_diagonal_element(2, 2, -1.0)).unwrap();
        assert_relative_eq!(r[(0, 0)], (-1f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(r[(1, 1)], 0.36787944117144233, max_relative = 1e-14);
        assert_eq!(r[(0, 1)], 0.0);
    }

    #[test]
    fn nilpotent_series_truncates() {
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let r = expm(&n).unwrap();
        assert_relative_eq!(r, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert_eq!(expm(&m), Err(ModelError::NonFinite));
    }

    #[test]
    fn matches_taylor_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &scale in &[0.01, 0.2, 1.0, 3.0, 20.0] {
            let m = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0) * scale / 5.0);
            let r = expm(&m).unwrap();
            let t = taylor_expm(&m);
            assert!((&r - &t).norm() <= 1e-10 * t.norm(), "scale {scale}");
        }
    }

    #[test]
    fn scalar_integrator() {
        let d = zoh_discretize(&DMatrix::zeros(1, 1), &DMatrix::from_element(1, 1, 1.0), &DMatrix::zeros(1, 0), 900.0)
            .unwrap();
        assert_relative_eq!(d.a[(0, 0)], 1.0);
        assert_relative_eq!(d.b[(0, 0)], 900.0, max_relative = 1e-14);
    }

    #[test]
    fn scalar_first_order_lag() {
        let d = zoh_discretize(
            &DMatrix::from_element(1, 1, -1.0),
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::from_element(1, 1, 2.0),
            1.0,
        )
        .unwrap();
        let e1 = (-1f64).exp();
        assert_relative_eq!(d.a[(0, 0)], e1, max_relative = 1e-14);
        assert_relative_eq!(d.b[(0, 0)], 1.0 - e1, max_relative = 1e-14);
        assert_relative_eq!(d.e[(0, 0)], 2.0 * (1.0 - e1), max_relative = 1e-14);
    }

    #[test]
    fn semigroup_and_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(4, 4, |i, j| if i == j { -1e-3 } else { rng.gen_range(0.0..2e-4) });
        let b = DMatrix::zeros(4, 1);
        let e = DMatrix::zeros(4, 1);
        let one = zoh_discretize(&a, &b, &e, 900.0).unwrap();
        let two = zoh_discretize(&a, &b, &e, 1800.0).unwrap();
        assert!((&one.a * &one.a - &two.a).amax() < 1e-9);
        let tiny = zoh_discretize(&a, &b, &e, 1e-4).unwrap();
        let approx_a = (tiny.a - DMatrix::identity(4, 4)) / 1e-4;
        assert!((approx_a - &a).amax() < 1e-8);
    }

    #[test]
    fn rejects_bad_step() {
        let z = DMatrix::zeros(1, 1);
        assert!(zoh_discretize(&z, &z, &z, 0.0).is_err());
        assert!(zoh_discretize(&z, &z, &z, -1.0).is_err());
    }
}
