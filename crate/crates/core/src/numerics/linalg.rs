use std::cmp::Ordering;

use rug::Float;

/// Determinant of a square matrix by Gaussian elimination with partial
/// pivoting, carried out at `prec` bits. The empty matrix has determinant 1.
pub fn determinant(mut a: Vec<Vec<Float>>, prec: u32) -> Float {
    let n = a.len();
    let mut det = Float::with_val(prec, 1);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].cmp_abs(&a[j][col]).unwrap_or(Ordering::Equal))
            .expect("non-empty range");
        if a[pivot][col].is_zero() {
            return Float::with_val(prec, 0);
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= &a[col][col];
        let (top, rest) = a.split_at_mut(col + 1);
        let prow = &top[col];
        for row in rest.iter_mut() {
            let f = Float::with_val(prec, &row[col] / &prow[col]);
            for j in col + 1..n {
                let t = Float::with_val(prec, &f * &prow[j]);
                row[j] -= t;
            }
        }
    }
    det
}
