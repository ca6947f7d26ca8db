//! Forward ops and their paired gradient ops.
//!
//! Gradient ops take the upstream cotangent and *accumulate* into the
//! gradient buffers they are handed.

use crate::{AimError, Result};

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(AimError::Shape(format!("{what}: expected {want} values, got {got}")));
    }
    Ok(())
}

/// `y = W x + b` with `W` stored row-major as `[out, in]`.
pub fn linear(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) -> Result<()> {
    let (n_out, n_in) = (b.len(), x.len());
    check_len("linear weights", w.len(), n_out * n_in)?;
    check_len("linear output", y.len(), n_out)?;
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        *yo = b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
    Ok(())
}

/// Accumulates `dW += dy x^T`, `db += dy`, `dx += W^T dy`.
pub fn linear_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) -> Result<()> {
    let (n_out, n_in) = (dy.len(), x.len());
    check_len("linear weights", w.len(), n_out * n_in)?;
    check_len("linear weight grad", dw.len(), n_out * n_in)?;
    check_len("linear bias grad", db.len(), n_out)?;
    check_len("linear input grad", dx.len(), n_in)?;
    for o in 0..n_out {
        let g = dy[o];
        if g == 0.0 {
            continue;
        }
        db[o] += g;
        let row = &w[o * n_in..(o + 1) * n_in];
        let drow = &mut dw[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            drow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
    Ok(())
}

pub fn relu(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Masks `dy` by the sign of the relu output.
pub fn relu_backward(out: &[f64], dy: &mut [f64]) {
    for (d, o) in dy.iter_mut().zip(out) {
        if *o <= 0.0 {
            *d = 0.0;
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_backward(out: f64, dy: f64) -> f64 {
    dy * out * (1.0 - out)
}

pub fn mul(a: &[f64], b: &[f64], out: &mut [f64]) -> Result<()> {
    check_len("mul rhs", b.len(), a.len())?;
    check_len("mul output", out.len(), a.len())?;
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x * y;
    }
    Ok(())
}

pub fn mul_backward(a: &[f64], b: &[f64], dy: &[f64], da: &mut [f64], db: &mut [f64]) {
    for i in 0..dy.len() {
        da[i] += dy[i] * b[i];
        db[i] += dy[i] * a[i];
    }
}

pub fn add(a: &[f64], b: &[f64], out: &mut [f64]) -> Result<()> {
    check_len("add rhs", b.len(), a.len())?;
    check_len("add output", out.len(), a.len())?;
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x + y;
    }
    Ok(())
}

pub fn add_backward(dy: &[f64], da: &mut [f64], db: &mut [f64]) {
    for i in 0..dy.len() {
        da[i] += dy[i];
        db[i] += dy[i];
    }
}

pub fn sum(x: &[f64]) -> f64 {
    x.iter().sum()
}

pub fn sum_backward(dy: f64, dx: &mut [f64]) {
    dx.iter_mut().for_each(|d| *d += dy);
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn mean_backward(dy: f64, dx: &mut [f64]) {
    let n = dx.len() as f64;
    dx.iter_mut().for_each(|d| *d += dy / n);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn close(a: &[f64], b: &[f64]) {
        for (x, y) in a.iter().zip(b) {
            let scale = x.abs().max(y.abs()).max(1e-6);
            assert!((x - y).abs() / scale < 1e-4, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn relu_and_sigmoid_basics() {
        let mut x = [-1.0, 2.0];
        relu(&mut x);
        let mut d = [1.0, 1.0];
        relu_backward(&x, &mut d);
        assert_eq!(d, [0.0, 1.0]);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn relu_layer_example() {
        let mut y = [0.0];
        linear(&[1.0, -1.0], &[0.0], &[2.0, 3.0], &mut y).unwrap();
        relu(&mut y);
        assert_eq!(y, [0.0]);
    }

    #[test]
    fn linear_shape_mismatch() {
        let mut y = [0.0; 2];
        assert!(linear(&[1.0; 5], &[0.0; 2], &[1.0; 3], &mut y).is_err());
    }

    #[test]
    fn linear_gradients() {
        let w = [0.3, -0.2, 0.5, 1.1, 0.7, -0.4];
        let b = [0.1, -0.3];
        let x = [0.9, -1.3, 0.4];
        let c = [1.5, -0.7];
        let loss = |w: &[f64], b: &[f64], x: &[f64]| {
            let mut y = [0.0; 2];
            linear(w, b, x, &mut y).unwrap();
            y[0] * c[0] + y[1] * c[1]
        };
        let (mut dw, mut db, mut dx) = ([0.0; 6], [0.0; 2], [0.0; 3]);
        linear_backward(&w, &x, &c, &mut dw, &mut db, &mut dx).unwrap();
        close(&dw, &fd(|w| loss(w, &b, &x), &w));
        close(&db, &fd(|b| loss(&w, b, &x), &b));
        close(&dx, &fd(|x| loss(&w, &b, x), &x));
    }

    #[test]
    fn elementwise_gradients() {
        let a = [0.5, -1.5, 2.0];
        let b = [1.2, 0.3, -0.8];
        let c = [0.4, 1.0, -2.0];
        let f_mul = |a: &[f64], b: &[f64]| {
            let mut o = [0.0; 3];
            mul(a, b, &mut o).unwrap();
            o.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>()
        };
        let (mut da, mut db) = ([0.0; 3], [0.0; 3]);
        mul_backward(&a, &b, &c, &mut da, &mut db);
        close(&da, &fd(|a| f_mul(a, &b), &a));
        close(&db, &fd(|b| f_mul(&a, b), &b));

        let f_add = |a: &[f64], b: &[f64]| {
            let mut o = [0.0; 3];
            add(a, b, &mut o).unwrap();
            o.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>()
        };
        let (mut da, mut db) = ([0.0; 3], [0.0; 3]);
        add_backward(&c, &mut da, &mut db);
        close(&da, &fd(|a| f_add(a, &b), &a));
        close(&db, &fd(|b| f_add(&a, b), &b));

        let mut dx = [0.0; 3];
        sum_backward(2.0, &mut dx);
        close(&dx, &fd(|x| 2.0 * sum(x), &a));
        let mut dx = [0.0; 3];
        mean_backward(2.0, &mut dx);
        close(&dx, &fd(|x| 2.0 * mean(x), &a));

        let z = 0.37;
        let s = sigmoid(z);
        let g = sigmoid_backward(s, 1.0);
        close(&[g], &fd(|x| sigmoid(x[0]), &[z]));

        let mut x = [0.4, -0.6, 1.3];
        relu(&mut x);
        let mut d = c;
        relu_backward(&x, &mut d);
        let f = |v: &[f64]| {
            let mut v = v.to_vec();
            relu(&mut v);
            v.iter().zip(&c).map(|(p, q)| p * q).sum::<f64>()
        };
        close(&d, &fd(f, &[0.4, -0.6, 1.3]));
    }
}
