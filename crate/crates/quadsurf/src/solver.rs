//! Sparse symmetric solves for weighted graph Laplacians.
//!
//! Jacobi-preconditioned conjugate gradient. Singular Laplacians are handled
//! by projecting out the constant vector on each connected component.

use crate::error::{Error, Result};
use crate::C64;

pub const DEFAULT_TOL: f64 = 1e-12;

/// Weighted graph Laplacian `(Lf)(v) = Σ w (f(v) − f(u))`.
#[derive(Clone, Debug)]
pub struct GraphLaplacian {
    adj: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    comp: Vec<usize>,
    comp_size: Vec<usize>,
}

impl GraphLaplacian {
    /// Self-loops are ignored; parallel edges add up.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut diag = vec![0.0; n];
        for (a, b, w) in edges {
            if a == b {
                continue;
            }
            adj[a].push((b, w));
            adj[b].push((a, w));
            diag[a] += w;
            diag[b] += w;
        }
        let mut comp = vec![usize::MAX; n];
        let mut comp_size = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let c = comp_size.len();
            let mut size = 0;
            let mut stack = vec![s];
            comp[s] = c;
            while let Some(v) = stack.pop() {
                size += 1;
                for &(u, _) in &adj[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = c;
                        stack.push(u);
                    }
                }
            }
            comp_size.push(size);
        }
        GraphLaplacian { adj, diag, comp, comp_size }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn components(&self) -> usize {
        self.comp_size.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for v in 0..self.len() {
            let mut s = self.diag[v] * x[v];
            for &(u, w) in &self.adj[v] {
                s -= w * x[u];
            }
            y[v] = s;
        }
    }

    /// Remove the mean on every component.
    pub fn deflate(&self, x: &mut [f64]) {
        let mut sums = vec![0.0; self.components()];
        for v in 0..self.len() {
            sums[self.comp[v]] += x[v];
        }
        for v in 0..self.len() {
            x[v] -= sums[self.comp[v]] / self.comp_size[self.comp[v]] as f64;
        }
    }

    /// Solve `L x = b` with `b` projected onto the range; the result has zero
    /// mean on every component.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut rhs = b.to_vec();
        self.deflate(&mut rhs);
        let op = |x: &[f64], y: &mut [f64]| self.apply(x, y);
        let mut x = pcg(op, &self.diag, &rhs, tol, 10 * self.len().max(10), |r| self.deflate(r))?;
        self.deflate(&mut x);
        Ok(x)
    }

    pub fn solve_complex(&self, b: &[C64], tol: f64) -> Result<Vec<C64>> {
        let re: Vec<f64> = b.iter().map(|z| z.re).collect();
        let im: Vec<f64> = b.iter().map(|z| z.im).collect();
        let xr = self.solve(&re, tol)?;
        let xi = if im.iter().all(|&v| v == 0.0) { vec![0.0; im.len()] } else { self.solve(&im, tol)? };
        Ok(xr.into_iter().zip(xi).map(|(a, b)| C64::new(a, b)).collect())
    }

    /// Solve `L x = b` at free vertices with `x` prescribed where `fixed` is set.
    pub fn solve_dirichlet(&self, fixed: &[Option<f64>], b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
        let mut pos = vec![usize::MAX; n];
        for (i, &v) in free.iter().enumerate() {
            pos[v] = i;
        }
        let mut rhs: Vec<f64> = free.iter().map(|&v| b[v]).collect();
        for (i, &v) in free.iter().enumerate() {
            for &(u, w) in &self.adj[v] {
                if let Some(g) = fixed[u] {
                    rhs[i] += w * g;
                }
            }
        }
        let diag: Vec<f64> = free.iter().map(|&v| self.diag[v]).collect();
        let op = |x: &[f64], y: &mut [f64]| {
            for (i, &v) in free.iter().enumerate() {
                let mut s = self.diag[v] * x[i];
                for &(u, w) in &self.adj[v] {
                    if pos[u] != usize::MAX {
                        s -= w * x[pos[u]];
                    }
                }
                y[i] = s;
            }
        };
        let xf = pcg(op, &diag, &rhs, tol, 10 * free.len().max(10), |_| {})?;
        let mut x: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        for (i, &v) in free.iter().enumerate() {
            x[v] = xf[i];
        }
        Ok(x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG; `project` is applied to every residual.
fn pcg(
    op: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
    project: impl Fn(&mut [f64]),
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let prec = |r: &[f64], z: &mut [f64]| {
        for i in 0..n {
            z[i] = if diag[i] > 0.0 { r[i] / diag[i] } else { 0.0 };
        }
    };
    let mut z = vec![0.0; n];
    prec(&r, &mut z);
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = 1.0;
    for _ in 0..max_iter {
        op(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let a = rz / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        project(&mut r);
        res = dot(&r, &r).sqrt() / bnorm;
        if res < tol {
            // recompute the true residual once to guard against drift
            let mut ax = vec![0.0; n];
            op(&x, &mut ax);
            let mut tr: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            project(&mut tr);
            let true_res = dot(&tr, &tr).sqrt() / bnorm;
            if true_res < tol * 10.0 {
                return Ok(x);
            }
            r = tr;
        }
        prec(&r, &mut z);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res < tol * 10.0 {
        return Ok(x);
    }
    Err(Error::NoConvergence { residual: res, iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> GraphLaplacian {
        GraphLaplacian::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0 + i as f64 * 0.1)))
    }

    #[test]
    fn solves_singular_system() {
        let l = cycle(12);
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = l.solve(&b, 1e-13).unwrap();
        let mut lx = vec![0.0; 12];
        l.apply(&x, &mut lx);
        let mut bd = b.clone();
        l.deflate(&mut bd);
        for i in 0..12 {
            assert!((lx[i] - bd[i]).abs() < 1e-11);
        }
        assert!(x.iter().sum::<f64>().abs() < 1e-11);
    }

    #[test]
    fn constants_are_kernel() {
        let l = cycle(7);
        let mut y = vec![0.0; 7];
        l.apply(&[3.0; 7], &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn dirichlet_path_is_linear() {
        let n = 9;
        let l = GraphLaplacian::from_edges(n, (0..n - 1).map(|i| (i, i + 1, 1.0)));
        let mut fixed = vec![None; n];
        fixed[0] = Some(0.0);
        fixed[n - 1] = Some(8.0);
        let x = l.solve_dirichlet(&fixed, &vec![0.0; n], 1e-14).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn isolated_vertices_get_zero() {
        let l = GraphLaplacian::from_edges(4, vec![(0, 1, 1.0)]);
        assert_eq!(l.components(), 3);
        let x = l.solve(&[1.0, -1.0, 5.0, 2.0], 1e-13).unwrap();
        assert_eq!(x[2], 0.0);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] + 0.5).abs() < 1e-12);
    }
}
