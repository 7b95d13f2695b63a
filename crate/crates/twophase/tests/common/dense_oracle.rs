//! Direct solve of the stacked interior and boundary relations for the
//! ansatz coefficients, independent of the symbol cascade.

use nalgebra::{DMatrix, DVector};
use twophase::mode::BoundaryDataHat;
use twophase::symbols::char_roots;
use twophase::{PhysicalParams, SpectralPoint, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Returns the coefficient vector ordered as `alpha+, beta+, alpha0, beta0,
/// alphab, betab, gamma0, gammab` and the relative residual of the stacked system.
pub fn dense_coefficients(pt: &SpectralPoint, p: &PhysicalParams, data: &BoundaryDataHat) -> (Vec<C64>, f64) {
    let r = char_roots(pt, p).unwrap();
    let n = pt.dim();
    let nt = n - 1;
    let a = r.a;
    let (ap, bp, bm) = (r.a_plus, r.b_plus, r.b_minus);
    let (mup, mum, nu, d) = (p.mu_plus, p.mu_minus, p.nu_plus, pt.delta);
    let b = p.b;
    let xi = |j: usize| I * pt.xi[j];
    let (apl, bpl, a0, b0, ab, bb) = (0, n, 2 * n, 3 * n, 4 * n, 5 * n);
    let (g0, gb) = (6 * n, 6 * n + 1);
    let cols = 6 * n + 2;
    let mut rows: Vec<(Vec<(usize, C64)>, C64)> = Vec::new();
    let zero = C64::new(0.0, 0.0);

    // interior relations from equating exponentials
    let s_up = mup * (ap * ap - bp * bp);
    let s_lo = C64::new(mum, 0.0) * (a * a - bm * bm);
    // i xi'.alpha+' - A+ alpha+N
    let upper_div = |row: &mut Vec<(usize, C64)>, c: C64| {
        for j in 0..nt {
            row.push((apl + j, c * xi(j)));
        }
        row.push((apl + nt, -c * ap));
    };
    for j in 0..nt {
        let mut row = vec![(apl + j, s_up)];
        upper_div(&mut row, (nu + d) * xi(j));
        rows.push((row, zero));
    }
    let mut row = vec![(apl + nt, s_up)];
    upper_div(&mut row, -(nu + d) * ap);
    rows.push((row, zero));
    let mut row = Vec::new();
    for j in 0..nt {
        row.push((apl + j, xi(j)));
        row.push((bpl + j, xi(j)));
    }
    row.push((apl + nt, -bp));
    row.push((bpl + nt, -bp));
    rows.push((row, zero));
    for j in 0..nt {
        rows.push((vec![(a0 + j, s_lo), (g0, xi(j))], zero));
        rows.push((vec![(ab + j, s_lo), (gb, xi(j))], zero));
    }
    rows.push((vec![(a0 + nt, s_lo), (g0, C64::new(a, 0.0))], zero));
    rows.push((vec![(ab + nt, s_lo), (gb, C64::new(-a, 0.0))], zero));
    for (al, be, sgn) in [(a0, b0, 1.0), (ab, bb, -1.0)] {
        let mut row = Vec::new();
        for j in 0..nt {
            row.push((al + j, xi(j)));
            row.push((be + j, xi(j)));
        }
        row.push((al + nt, sgn * bm));
        row.push((be + nt, sgn * bm));
        rows.push((row, zero));
        let mut row: Vec<(usize, C64)> = (0..nt).map(|j| (al + j, xi(j))).collect();
        row.push((al + nt, C64::new(sgn * a, 0.0)));
        rows.push((row, zero));
    }

    // interface and bottom conditions
    let e = (-bm * b).exp();
    let ea = C64::new((-a * b).exp(), 0.0);
    for j in 0..nt {
        let row = vec![
            (apl + j, mup * (ap - bp)),
            (bpl + j, -mup * bp),
            (bpl + nt, mup * xi(j)),
            (a0 + j, -mum * (bm - a)),
            (b0 + j, -mum * bm),
            (ab + j, -mum * (-bm * e + a * ea)),
            (bb + j, mum * bm * e),
            (b0 + nt, -mum * xi(j)),
            (ab + nt, -mum * xi(j) * (e - ea)),
            (bb + nt, -mum * xi(j) * e),
        ];
        rows.push((row, data.h[j]));
    }
    let mut row = vec![
        (apl + nt, -2.0 * mup * (bp - ap) - (nu - mup + d) * (bp - ap)),
        (bpl + nt, -2.0 * mup * bp - (nu - mup + d) * bp),
        (a0 + nt, -2.0 * mum * (bm - a)),
        (b0 + nt, -2.0 * mum * bm),
        (ab + nt, -2.0 * mum * (-bm * e + a * ea)),
        (bb + nt, 2.0 * mum * bm * e),
        (g0, C64::new(1.0, 0.0)),
        (gb, ea),
    ];
    for j in 0..nt {
        row.push((bpl + j, (nu - mup + d) * xi(j)));
    }
    rows.push((row, data.h[nt]));
    for jj in 0..n {
        rows.push((vec![(bpl + jj, C64::new(1.0, 0.0)), (b0 + jj, C64::new(-1.0, 0.0)), (ab + jj, -(e - ea)), (bb + jj, -e)], data.k[jj]));
        rows.push((vec![(a0 + jj, e - ea), (b0 + jj, e), (bb + jj, C64::new(1.0, 0.0))], zero));
    }

    // equilibrate rows before the least-squares solve
    let m = rows.len();
    let mut mat = DMatrix::<C64>::zeros(m, cols);
    let mut rhs = DVector::<C64>::zeros(m);
    for (i, (row, v)) in rows.iter().enumerate() {
        let w = row.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
        for (j, c) in row {
            mat[(i, *j)] += c / w;
        }
        rhs[i] = v / w;
    }
    // column scaling as well
    let mut cscale = vec![1.0; cols];
    for j in 0..cols {
        let s = (0..m).map(|i| mat[(i, j)].norm()).fold(0.0, f64::max);
        if s > 0.0 {
            cscale[j] = s;
            for i in 0..m {
                mat[(i, j)] /= s;
            }
        }
    }
    let svd = mat.clone().svd(true, true);
    let y = svd.solve(&rhs, 1e-14).unwrap();
    let res = (&mat * &y - &rhs).norm() / rhs.norm().max(1e-300);
    let x: Vec<C64> = (0..cols).map(|j| y[j] / cscale[j]).collect();
    (x, res)
}
