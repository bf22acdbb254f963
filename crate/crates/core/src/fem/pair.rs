use super::{solve_cg, CsrMatrix, DofMap};
use crate::error::Result;

/// Solves the exchange-coupled pair
/// `[A₁+X, −X; −X, A₂+X] [u₁; u₂] = [r₁; r₂]`
/// in sum/difference variables `s = u₁+u₂`, `d = u₁−u₂`:
/// `[A₁+A₂, A₁−A₂; A₁−A₂, A₁+A₂+4X] [s; d] = 2[r₁+r₂; r₁−r₂]`.
///
/// With `A₁ = A₂` and `r₁ = r₂` the difference block sees an exactly zero right-hand side
/// and zero coupling, so `u₁` and `u₂` come out bitwise equal. `map` constrains single-field
/// nodes and is applied to both variables.
#[allow(clippy::too_many_arguments)]
pub fn solve_exchange_pair(
    a1: &CsrMatrix,
    a2: &CsrMatrix,
    x: &CsrMatrix,
    r: [&[f64]; 2],
    guess: [&[f64]; 2],
    map: &DofMap,
    tol: f64,
    max_iter: usize,
) -> Result<[Vec<f64>; 2]> {
    let sum = a1.linear_combination(1.0, a2, 1.0);
    let diff = a1.linear_combination(1.0, a2, -1.0);
    let sum_x = sum.linear_combination(1.0, x, 4.0);
    let rs = map.restrict_matrix(&sum);
    let rd = map.restrict_matrix(&diff);
    let rx = map.restrict_matrix(&sum_x);
    let block = CsrMatrix::block2(&rs, &rd, &rd, &rx);
    let b1: Vec<f64> = r[0].iter().zip(r[1]).map(|(p, q)| 2.0 * (p + q)).collect();
    let b2: Vec<f64> = r[0].iter().zip(r[1]).map(|(p, q)| 2.0 * (p - q)).collect();
    let mut b = map.restrict_vec(&b1);
    b.extend(map.restrict_vec(&b2));
    let g1: Vec<f64> = guess[0].iter().zip(guess[1]).map(|(p, q)| p + q).collect();
    let g2: Vec<f64> = guess[0].iter().zip(guess[1]).map(|(p, q)| p - q).collect();
    let mut g = map.gather(&g1);
    g.extend(map.gather(&g2));
    let (sol, _) = solve_cg(&block, &b, tol, max_iter, Some(&g))?;
    let m = map.n_dofs;
    let s = map.expand(&sol[..m]);
    let d = map.expand(&sol[m..]);
    Ok([
        s.iter().zip(&d).map(|(p, q)| 0.5 * (p + q)).collect(),
        s.iter().zip(&d).map(|(p, q)| 0.5 * (p - q)).collect(),
    ])
}
