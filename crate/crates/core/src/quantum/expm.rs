//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant (Higham 2005).

use num_complex::Complex64;

use super::operator::CMatrix;

const PADE13: [f64; 14] = [
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
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled(m: &CMatrix, f: f64) -> CMatrix {
    m.map(|z| z * f)
}

pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = scaled(a, 0.5f64.powi(s));
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = &a6 * (scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]));
    let u = &a * (inner_u + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&id, b[1]));
    let inner_v = &a6 * (scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]));
    let v = inner_v + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .unwrap_or_else(|| CMatrix::from_element(n, n, Complex64::new(f64::NAN, 0.0)));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_exponential() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = Complex64::new(-1.0, 2.0);
        a[(1, 1)] = Complex64::new(0.5, 0.0);
        a[(2, 2)] = Complex64::new(-30.0, -7.0);
        let e = expm(&a);
        for i in 0..3 {
            let want = a[(i, i)].exp();
            assert!((e[(i, i)] - want).norm() < 1e-12 * want.norm().max(1e-300));
        }
    }

    #[test]
    fn rotation_generator() {
        // exp([[0, -w], [w, 0]]) is a rotation by w
        let w = 12.3;
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = Complex64::new(-w, 0.0);
        a[(1, 0)] = Complex64::new(w, 0.0);
        let e = expm(&a);
        assert!((e[(0, 0)].re - w.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - w.sin()).abs() < 1e-12);
    }

    #[test]
    fn nilpotent_jordan_block() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = Complex64::new(-1.0, 0.0);
        a[(1, 1)] = Complex64::new(-1.0, 0.0);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        let e = expm(&a);
        let em1 = (-1.0f64).exp();
        assert!((e[(0, 1)].re - em1).abs() < 1e-14);
        assert!((e[(0, 0)].re - em1).abs() < 1e-14);
    }
}
