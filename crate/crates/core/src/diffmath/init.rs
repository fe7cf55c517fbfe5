use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::tensor::Tensor;

/// Orthogonal initialisation: QR of a Gaussian matrix with the signs of
/// `diag(R)` folded into `Q`. The result has orthonormal columns when
/// `rows ≥ cols` and orthonormal rows otherwise, scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Tensor {
    assert!(rows >= 1 && cols >= 1, "orthogonal init needs a non-empty shape");
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = Tensor::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            out.set(i, j, gain * v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram_error(t: &Tensor) -> f64 {
        let g = if t.rows() >= t.cols() {
            t.transpose().matmul(t).unwrap()
        } else {
            t.matmul(&t.transpose()).unwrap()
        };
        let n = g.rows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn orthonormal_for_many_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(r, c) in &[(4, 4), (8, 3), (3, 8), (1, 1), (1, 5), (64, 64), (256, 384)] {
            let q = orthogonal(r, c, 1.0, &mut rng);
            assert_eq!(q.shape(), (r, c));
            assert!(gram_error(&q) < 1e-6, "{r}x{c}");
        }
    }

    #[test]
    fn one_by_one_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let q = orthogonal(1, 1, 1.0, &mut rng);
            assert!((q.item().abs() - 1.0).abs() < 1e-12);
        }
    }
}
