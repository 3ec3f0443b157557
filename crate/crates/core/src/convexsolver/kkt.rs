//! Structured KKT solves for the trajectory subproblem.
//!
//! Every Newton step of the barrier solver needs the saddle-point system
//!
//! ```text
//!     [ B  Aᵀ ] [dx]   [r1]
//!     [ A  0  ] [ν ] = [r2]
//! ```
//!
//! where `B` is block diagonal (one symmetric positive-definite 8×8 block
//! per slot: position, velocity, acceleration, squared-slant-distance slack
//! ζ, airspeed slack τ) and `A` stacks the kinematic coupling rows (four per
//! adjacent slot pair) plus a handful of optional "extra" equality rows
//! (pinned start position, periodic velocity).
//!
//! With `B` inverted blockwise, the dual Schur complement `M = A·B⁻¹·Aᵀ`
//! restricted to the kinematic rows is block tridiagonal, and the extra rows
//! only border it, so the whole solve is `O(N)` in the slot count. The
//! rank-one Hessian contribution of the shared energy constraint is applied
//! on top of this via the Sherman–Morrison identity by the caller.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use crate::math::FloatExt;

/// Variables per slot: `qx, qy, vx, vy, ax, ay, ζ, τ`.
pub(crate) const NV: usize = 8;
/// Kinematic equality rows per adjacent slot pair: `qx, qy, vx, vy`.
pub(crate) const NC: usize = 4;

/// One extra equality row `Σ_slots e[slot]·x[slot] = rhs`, sparse over slots.
#[derive(Debug, Clone)]
pub(crate) struct ExtraRow {
    /// (slot index, coefficients on that slot's eight variables).
    pub parts: Vec<(usize, [f64; NV])>,
    /// Right-hand side of the row.
    pub rhs: f64,
}

/// Static description of the equality structure.
#[derive(Debug, Clone)]
pub(crate) struct KktSystem {
    /// Number of slots.
    pub n: usize,
    /// Slot length.
    pub dt: f64,
    /// Extra equality rows beyond the kinematics.
    pub extras: Vec<ExtraRow>,
}

/// Cholesky factor of a row-major `n × n` matrix, lower triangle in place.
/// Returns `false` on a non-positive pivot.
fn chol_in_place(n: usize, a: &mut [f64]) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return false;
                }
                a[i * n + i] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    // Zero the strict upper triangle so later reads are unambiguous.
    for i in 0..n {
        for j in i + 1..n {
            a[i * n + j] = 0.0;
        }
    }
    true
}

/// Solve `L·Lᵀ·x = b` in place given the lower factor.
fn chol_solve(n: usize, l: &[f64], x: &mut [f64]) {
    for i in 0..n {
        let mut sum = x[i];
        for k in 0..i {
            sum -= l[i * n + k] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
}

/// `y += m·x` for a row-major `rows × cols` matrix.
fn mat_vec_acc(rows: usize, cols: usize, m: &[f64], x: &[f64], y: &mut [f64]) {
    for r in 0..rows {
        let mut sum = 0.0;
        for c in 0..cols {
            sum += m[r * cols + c] * x[c];
        }
        y[r] += sum;
    }
}

/// `y += mᵀ·x` for a row-major `rows × cols` matrix.
fn mat_t_vec_acc(rows: usize, cols: usize, m: &[f64], x: &[f64], y: &mut [f64]) {
    for r in 0..rows {
        for c in 0..cols {
            y[c] += m[r * cols + c] * x[r];
        }
    }
}

impl KktSystem {
    /// The constant kinematic block `C = −[T_s T_a 0]` applied to slot `n`
    /// of pair `n` (rows: q then v of the next slot).
    fn c_block(&self) -> [f64; NC * NV] {
        let dt = self.dt;
        let h = 0.5 * dt * dt;
        let mut c = [0.0; NC * NV];
        // row 0 (qx): −qx − dt·vx − h·ax
        c[0] = -1.0;
        c[2] = -dt;
        c[4] = -h;
        // row 1 (qy)
        c[NV + 1] = -1.0;
        c[NV + 3] = -dt;
        c[NV + 5] = -h;
        // row 2 (vx): −vx − dt·ax
        c[2 * NV + 2] = -1.0;
        c[2 * NV + 4] = -dt;
        // row 3 (vy)
        c[3 * NV + 3] = -1.0;
        c[3 * NV + 5] = -dt;
        c
    }

    /// Number of kinematic equality rows.
    #[inline]
    pub fn kin_rows(&self) -> usize {
        NC * (self.n - 1)
    }

    /// Apply `A` (kinematic rows only) to a full primal vector.
    pub fn apply_kinematics(&self, x: &[f64], out: &mut [f64]) {
        let c = self.c_block();
        out.iter_mut().for_each(|v| *v = 0.0);
        for pair in 0..self.n - 1 {
            let xs = &x[pair * NV..(pair + 1) * NV];
            let xn = &x[(pair + 1) * NV..(pair + 2) * NV];
            let row = &mut out[pair * NC..(pair + 1) * NC];
            mat_vec_acc(NC, NV, &c, xs, row);
            // D = [I4 | 0] on the next slot.
            for r in 0..NC {
                row[r] += xn[r];
            }
        }
    }

    /// Accumulate `Aᵀ·ν` (kinematic rows only) into a full primal vector.
    pub fn apply_kinematics_t(&self, nu: &[f64], out: &mut [f64]) {
        let c = self.c_block();
        for pair in 0..self.n - 1 {
            let nus = &nu[pair * NC..(pair + 1) * NC];
            mat_t_vec_acc(NC, NV, &c, nus, &mut out[pair * NV..(pair + 1) * NV]);
            let next = &mut out[(pair + 1) * NV..(pair + 2) * NV];
            for r in 0..NC {
                next[r] += nus[r];
            }
        }
    }

    /// Apply the extra rows to a full primal vector.
    pub fn apply_extras(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.extras.iter().enumerate() {
            let mut sum = 0.0;
            for &(slot, coeffs) in &row.parts {
                for c in 0..NV {
                    sum += coeffs[c] * x[slot * NV + c];
                }
            }
            out[r] = sum;
        }
    }

    /// Accumulate `Eᵀ·w` into a full primal vector.
    pub fn apply_extras_t(&self, w: &[f64], out: &mut [f64]) {
        for (r, row) in self.extras.iter().enumerate() {
            for &(slot, coeffs) in &row.parts {
                for c in 0..NV {
                    out[slot * NV + c] += coeffs[c] * w[r];
                }
            }
        }
    }

    /// Factor the saddle-point system for the given Hessian blocks.
    ///
    /// `blocks` holds one row-major 8×8 SPD matrix per slot. On a marginal
    /// Cholesky breakdown a tiny diagonal bump is retried before giving up.
    pub fn factor(&self, blocks: &[[f64; NV * NV]]) -> Option<Factorization> {
        assert_eq!(blocks.len(), self.n);
        let c = self.c_block();

        // Per-slot Cholesky factors (with escalating jitter on breakdown).
        let mut chol_b: Vec<[f64; NV * NV]> = Vec::with_capacity(self.n);
        for b in blocks {
            let mut fac = *b;
            if !chol_in_place(NV, &mut fac) {
                let scale = (0..NV).map(|i| b[i * NV + i].abs()).fold(0.0, f64::max);
                let mut ok = false;
                for bump in [1e-14, 1e-10] {
                    fac = *b;
                    for i in 0..NV {
                        fac[i * NV + i] += bump * (1.0 + scale);
                    }
                    if chol_in_place(NV, &mut fac) {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    return None;
                }
            }
            chol_b.push(fac);
        }

        // Y_n = B_n⁻¹·Cᵀ and Z_n = B_n⁻¹·[I4;0]ᵀ, both 8×4, column-major
        // as four length-8 columns.
        let mut y_cols: Vec<[[f64; NV]; NC]> = Vec::with_capacity(self.n);
        let mut z_cols: Vec<[[f64; NV]; NC]> = Vec::with_capacity(self.n);
        for slot in 0..self.n {
            let l = &chol_b[slot];
            let mut ycol = [[0.0; NV]; NC];
            let mut zcol = [[0.0; NV]; NC];
            for r in 0..NC {
                for v in 0..NV {
                    ycol[r][v] = c[r * NV + v];
                }
                chol_solve(NV, l, &mut ycol[r]);
                zcol[r][r] = 1.0;
                chol_solve(NV, l, &mut zcol[r]);
            }
            y_cols.push(ycol);
            z_cols.push(zcol);
        }

        // Block-tridiagonal Schur complement M = A·B⁻¹·Aᵀ over the
        // kinematic rows: diag blocks C·Y_n + topleft(Z_{n+1}),
        // super-diagonal blocks topleft4(Y_{n+1}) (as D·B_{n+1}⁻¹·Cᵀ).
        let pairs = self.n - 1;
        let mut m_diag: Vec<[f64; NC * NC]> = vec![[0.0; NC * NC]; pairs];
        let mut m_off: Vec<[f64; NC * NC]> = vec![[0.0; NC * NC]; pairs.saturating_sub(1)];
        for pair in 0..pairs {
            let d = &mut m_diag[pair];
            for r in 0..NC {
                for col in 0..NC {
                    let mut sum = 0.0;
                    for v in 0..NV {
                        sum += c[r * NV + v] * y_cols[pair][col][v];
                    }
                    sum += z_cols[pair + 1][col][r];
                    d[r * NC + col] = sum;
                }
            }
            if pair + 1 < pairs {
                // M_{pair,pair+1} = D·B_{pair+1}⁻¹·Cᵀ = top 4 rows of Y_{pair+1}.
                let o = &mut m_off[pair];
                for r in 0..NC {
                    for col in 0..NC {
                        o[r * NC + col] = y_cols[pair + 1][col][r];
                    }
                }
            }
        }

        // Block-tridiagonal Cholesky: M = L·Lᵀ with lower block bidiagonal L.
        let mut l_diag: Vec<[f64; NC * NC]> = Vec::with_capacity(pairs);
        let mut l_sub: Vec<[f64; NC * NC]> = Vec::with_capacity(pairs.saturating_sub(1));
        for pair in 0..pairs {
            let mut d = m_diag[pair];
            if pair > 0 {
                let s = &l_sub[pair - 1];
                for r in 0..NC {
                    for col in 0..=r {
                        let mut sum = 0.0;
                        for k in 0..NC {
                            sum += s[r * NC + k] * s[col * NC + k];
                        }
                        d[r * NC + col] -= sum;
                        d[col * NC + r] = d[r * NC + col];
                    }
                }
            }
            if !chol_in_place(NC, &mut d) {
                return None;
            }
            if pair + 1 < pairs {
                // Solve L_pair·(L_subᵀ column j) = M_off column j.
                let mut s = [0.0; NC * NC];
                for j in 0..NC {
                    let mut col = [0.0; NC];
                    for r in 0..NC {
                        col[r] = m_off[pair][r * NC + j];
                    }
                    // forward solve with the freshly computed factor
                    for r in 0..NC {
                        let mut sum = col[r];
                        for k in 0..r {
                            sum -= d[r * NC + k] * col[k];
                        }
                        col[r] = sum / d[r * NC + r];
                    }
                    for r in 0..NC {
                        s[j * NC + r] = col[r];
                    }
                }
                l_sub.push(s);
            }
            l_diag.push(d);
        }

        let mut fac = Factorization {
            sys: self.clone(),
            chol_b,
            m_l_diag: l_diag,
            m_l_sub: l_sub,
            extra_u: Vec::new(),
            extra_rhs_m: Vec::new(),
            extra_x: Vec::new(),
            s_chol: Vec::new(),
        };

        // Border for the extra equality rows.
        let k = self.extras.len();
        if k > 0 {
            let nf = self.n * NV;
            for row in &self.extras {
                // u_r = B⁻¹·e_rᵀ, stored dense for simplicity.
                let mut u = vec![0.0; nf];
                for &(slot, coeffs) in &row.parts {
                    let mut local = coeffs;
                    chol_solve(NV, &fac.chol_b[slot], &mut local);
                    for cidx in 0..NV {
                        u[slot * NV + cidx] += local[cidx];
                    }
                }
                let mut rhs_m = vec![0.0; self.kin_rows()];
                self.apply_kinematics(&u, &mut rhs_m);
                let mut x = rhs_m.clone();
                fac.tri_solve(&mut x);
                fac.extra_u.push(u);
                fac.extra_rhs_m.push(rhs_m);
                fac.extra_x.push(x);
            }
            // S = E·B⁻¹·Eᵀ − R·M⁻¹·Rᵀ, then Cholesky.
            let mut s = vec![0.0; k * k];
            for r in 0..k {
                for scol in 0..k {
                    let mut val = 0.0;
                    for &(slot, coeffs) in &self.extras[scol].parts {
                        for cidx in 0..NV {
                            val += coeffs[cidx] * fac.extra_u[r][slot * NV + cidx];
                        }
                    }
                    let dotted: f64 = fac.extra_rhs_m[r]
                        .iter()
                        .zip(&fac.extra_x[scol])
                        .map(|(a, b)| a * b)
                        .sum();
                    s[r * k + scol] = val - dotted;
                }
            }
            if !chol_in_place(k, &mut s) {
                return None;
            }
            fac.s_chol = s;
        }

        Some(fac)
    }
}

/// Reusable factorization of one Newton KKT system.
pub(crate) struct Factorization {
    sys: KktSystem,
    chol_b: Vec<[f64; NV * NV]>,
    m_l_diag: Vec<[f64; NC * NC]>,
    m_l_sub: Vec<[f64; NC * NC]>,
    extra_u: Vec<Vec<f64>>,
    extra_rhs_m: Vec<Vec<f64>>,
    extra_x: Vec<Vec<f64>>,
    s_chol: Vec<f64>,
}

impl Factorization {
    /// Solve the block-tridiagonal system `M·y = b` in place.
    fn tri_solve(&self, b: &mut [f64]) {
        let pairs = self.m_l_diag.len();
        // forward
        for pair in 0..pairs {
            if pair > 0 {
                let s = &self.m_l_sub[pair - 1];
                let (prev, cur) = b.split_at_mut(pair * NC);
                let prev = &prev[(pair - 1) * NC..];
                for r in 0..NC {
                    let mut sum = 0.0;
                    for k in 0..NC {
                        sum += s[r * NC + k] * prev[k];
                    }
                    cur[r] -= sum;
                }
            }
            let l = &self.m_l_diag[pair];
            let seg = &mut b[pair * NC..(pair + 1) * NC];
            for r in 0..NC {
                let mut sum = seg[r];
                for k in 0..r {
                    sum -= l[r * NC + k] * seg[k];
                }
                seg[r] = sum / l[r * NC + r];
            }
        }
        // backward
        for pair in (0..pairs).rev() {
            let l = &self.m_l_diag[pair];
            if pair + 1 < pairs {
                let s = &self.m_l_sub[pair];
                let (cur, next) = b.split_at_mut((pair + 1) * NC);
                let cur = &mut cur[pair * NC..];
                for k in 0..NC {
                    for r in 0..NC {
                        cur[r] -= s[k * NC + r] * next[k];
                    }
                }
            }
            let seg = &mut b[pair * NC..(pair + 1) * NC];
            for r in (0..NC).rev() {
                let mut sum = seg[r];
                for k in r + 1..NC {
                    sum -= l[k * NC + r] * seg[k];
                }
                seg[r] = sum / l[r * NC + r];
            }
        }
    }

    /// Solve a block of `B·x = b` per slot, in place.
    fn block_solve(&self, x: &mut [f64]) {
        for slot in 0..self.sys.n {
            chol_solve(NV, &self.chol_b[slot], &mut x[slot * NV..(slot + 1) * NV]);
        }
    }

    /// Solve the full saddle-point system for a general right-hand side:
    /// `B·dx + Aᵀν + Eᵀw = r1`, `A·dx = r2`, `E·dx = re`.
    pub fn solve(&self, r1: &[f64], r2: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let sys = &self.sys;
        let k = sys.extras.len();

        let mut u = r1.to_vec();
        self.block_solve(&mut u);

        let mut rhs_m = vec![0.0; sys.kin_rows()];
        sys.apply_kinematics(&u, &mut rhs_m);
        for (a, b) in rhs_m.iter_mut().zip(r2) {
            *a -= b;
        }
        let mut nu = rhs_m;
        self.tri_solve(&mut nu);

        let mut w = vec![0.0; k];
        if k > 0 {
            let mut rhs_e = vec![0.0; k];
            sys.apply_extras(&u, &mut rhs_e);
            for (r, rhs) in rhs_e.iter_mut().enumerate() {
                *rhs -= re[r];
                let ray: f64 = self.extra_rhs_m[r].iter().zip(&nu).map(|(a, b)| a * b).sum();
                *rhs -= ray;
            }
            chol_solve(k, &self.s_chol, &mut rhs_e);
            w = rhs_e;
            for r in 0..k {
                for (nv, xv) in nu.iter_mut().zip(&self.extra_x[r]) {
                    *nv -= xv * w[r];
                }
            }
        }

        // dx = B⁻¹(r1 − Aᵀν − Eᵀw) = u − B⁻¹Aᵀν − Σ w_r·u_r
        let mut at_nu = vec![0.0; sys.n * NV];
        sys.apply_kinematics_t(&nu, &mut at_nu);
        self.block_solve(&mut at_nu);
        let mut dx = u;
        for (d, a) in dx.iter_mut().zip(&at_nu) {
            *d -= a;
        }
        for r in 0..k {
            for (d, uv) in dx.iter_mut().zip(&self.extra_u[r]) {
                *d -= w[r] * uv;
            }
        }
        (dx, nu, w)
    }
}

/// Apply the block-diagonal `B` to a primal vector.
pub(crate) fn apply_blocks(blocks: &[[f64; NV * NV]], x: &[f64], out: &mut [f64]) {
    for (slot, b) in blocks.iter().enumerate() {
        let xs = &x[slot * NV..(slot + 1) * NV];
        let os = &mut out[slot * NV..(slot + 1) * NV];
        for r in 0..NV {
            let mut sum = 0.0;
            for c in 0..NV {
                sum += b[r * NV + c] * xs[c];
            }
            os[r] = sum;
        }
    }
}
