use super::field::gradient_of;
use super::{Grid, SolverError};
use crate::model::{DiffusionMatrixField, Mat, MAX_DIM};
use alloc::vec;
use alloc::vec::Vec;

/// Solution of one linear parabolic equation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    /// `level * n_nodes + node`
    pub values: Vec<f64>,
    /// `(level * n_nodes + node) * dim + d`
    pub gradients: Vec<f64>,
}

/// Thomas algorithm for `sub[i] y[i-1] + diag[i] y[i] + sup[i] y[i+1] = rhs[i]`.
/// `None` on a zero pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let mut y = rhs.to_vec();
    let mut work = vec![0.0; rhs.len()];
    thomas(sub, diag, sup, &mut y, &mut work).then_some(y)
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], y: &mut [f64], c: &mut [f64]) -> bool {
    let n = y.len();
    if n == 0 {
        return true;
    }
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return false;
    }
    y[0] /= beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        if beta == 0.0 || !beta.is_finite() {
            return false;
        }
        y[i] = (y[i] - sub[i] * y[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        y[i] -= c[i + 1] * y[i + 1];
    }
    true
}

/// Solves `V_s − Σ a_hk V_hk = drift·∇V + source` from `V(0,·) = terminal`
/// with Dirichlet data `terminal` on boundary nodes.
///
/// `drift` is laid out `(level * n_nodes + node) * dim + d` and `source`
/// `level * n_nodes + node`; the step from level k to k+1 uses drift and
/// source at level k and `a` at level k+1 (physical time `T − s_{k+1}`).
pub fn linear_parabolic_solve(
    grid: &Grid,
    a_field: &DiffusionMatrixField,
    drift: &[f64],
    source: &[f64],
    terminal: &[f64],
) -> Result<ScalarField, SolverError> {
    let mut out = march(grid, a_field, drift, &[source], &[terminal])?;
    let values = out.pop().expect("one equation");
    let gradients = gradient_of(grid, &values);
    Ok(ScalarField { grid: *grid, values, gradients })
}

/// Marches several equations sharing `a` and the drift.
pub(crate) fn march(
    grid: &Grid,
    a_field: &DiffusionMatrixField,
    drift: &[f64],
    sources: &[&[f64]],
    terminals: &[&[f64]],
) -> Result<Vec<Vec<f64>>, SolverError> {
    let n = grid.n_nodes();
    let dim = grid.dim;
    let levels = grid.levels();
    if a_field.dim() != dim {
        return Err(SolverError::InvalidInput("diffusion field dimension differs from grid".into()));
    }
    if drift.len() != levels * n * dim {
        return Err(SolverError::InvalidInput(alloc::format!(
            "drift field needs {} entries, got {}",
            levels * n * dim,
            drift.len()
        )));
    }
    for (s, g) in sources.iter().zip(terminals) {
        if s.len() != levels * n || g.len() != n {
            return Err(SolverError::InvalidInput("source or terminal data has the wrong size".into()));
        }
    }
    check_cfl(grid, drift)?;

    let mut a = vec![[[0.0; MAX_DIM]; MAX_DIM]; n];
    let mut outs: Vec<Vec<f64>> = terminals
        .iter()
        .map(|g| {
            let mut v = vec![0.0; levels * n];
            v[..n].copy_from_slice(g);
            v
        })
        .collect();
    let mut scratch = Scratch::new(grid.nodes_per_axis, n);

    for k in 0..grid.time_steps {
        let t_next = grid.horizon - grid.s(k + 1);
        for (node, ak) in a.iter_mut().enumerate() {
            if !grid.is_boundary(node) {
                let x = grid.node_coords(node);
                *ak = a_field.at(t_next, &x[..dim]);
            }
        }
        let f = &drift[k * n * dim..(k + 1) * n * dim];
        for ((out, src), g) in outs.iter_mut().zip(sources).zip(terminals) {
            let (done, rest) = out.split_at_mut((k + 1) * n);
            let prev = &done[k * n..];
            let next = &mut rest[..n];
            step(grid, &a, f, &src[k * n..(k + 1) * n], g, prev, next, &mut scratch)
                .map_err(|line| SolverError::Breakdown { level: k + 1, line })?;
            if let Some(node) = next.iter().position(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite { level: k + 1, x: grid.node_coords(node) });
            }
        }
    }
    Ok(outs)
}

fn check_cfl(grid: &Grid, drift: &[f64]) -> Result<(), SolverError> {
    let n = grid.n_nodes();
    let dim = grid.dim;
    let scale = grid.dt() / grid.spacing();
    let mut worst = (0.0, 0usize, 0usize);
    for k in 0..grid.time_steps {
        for node in 0..n {
            if grid.is_boundary(node) {
                continue;
            }
            let base = (k * n + node) * dim;
            let r: f64 = drift[base..base + dim].iter().map(|f| f.abs()).sum::<f64>() * scale;
            if !(r <= worst.0) {
                worst = (r, k, node);
            }
        }
    }
    if !(worst.0 <= 1.0 + 1e-12) {
        return Err(SolverError::Cfl { ratio: worst.0, level: worst.1, x: grid.node_coords(worst.2) });
    }
    Ok(())
}

struct Scratch {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    y: Vec<f64>,
    c: Vec<f64>,
    half: Vec<f64>,
}

impl Scratch {
    fn new(m: usize, n: usize) -> Scratch {
        let line = m - 2;
        Scratch {
            sub: vec![0.0; line],
            diag: vec![0.0; line],
            sup: vec![0.0; line],
            y: vec![0.0; line],
            c: vec![0.0; line],
            half: vec![0.0; n],
        }
    }

    /// Implicit solve of `(I − dt a_dd D_dd) w = rhs` along one line of
    /// interior nodes `first + j*stride`, j = 1..m-2, with Dirichlet ends `g`.
    #[allow(clippy::too_many_arguments)]
    fn line_solve(
        &mut self,
        grid: &Grid,
        coef: impl Fn(usize) -> f64,
        rhs: &[f64],
        g: &[f64],
        first: usize,
        stride: usize,
        out: &mut [f64],
    ) -> bool {
        let m = grid.nodes_per_axis;
        let r0 = grid.dt() / (grid.spacing() * grid.spacing());
        for j in 1..m - 1 {
            let node = first + j * stride;
            let r = r0 * coef(node);
            let i = j - 1;
            self.sub[i] = -r;
            self.diag[i] = 1.0 + 2.0 * r;
            self.sup[i] = -r;
            self.y[i] = rhs[node];
        }
        let left = first;
        let right = first + (m - 1) * stride;
        let last = m - 3;
        self.y[0] -= self.sub[0] * g[left];
        self.y[last] -= self.sup[last] * g[right];
        if !thomas(&self.sub, &self.diag, &self.sup, &mut self.y, &mut self.c) {
            return false;
        }
        for j in 1..m - 1 {
            out[first + j * stride] = self.y[j - 1];
        }
        out[left] = g[left];
        out[right] = g[right];
        true
    }
}

#[allow(clippy::too_many_arguments)]
fn step(
    grid: &Grid,
    a: &[Mat],
    f: &[f64],
    src: &[f64],
    g: &[f64],
    prev: &[f64],
    next: &mut [f64],
    sc: &mut Scratch,
) -> Result<(), usize> {
    let dim = grid.dim;
    let m = grid.nodes_per_axis;
    let h = grid.spacing();
    let dt = grid.dt();
    let strides = [if dim == 1 { 1 } else { m }, 1];

    // explicit part: upwind advection, source, mixed derivative
    let mut rhs = core::mem::take(&mut sc.half);
    for node in 0..grid.n_nodes() {
        if grid.is_boundary(node) {
            rhs[node] = g[node];
            continue;
        }
        let v = prev[node];
        let mut adv = 0.0;
        for d in 0..dim {
            let fd = f[node * dim + d];
            let s = strides[d];
            adv += if fd > 0.0 {
                fd * (prev[node + s] - v) / h
            } else {
                fd * (v - prev[node - s]) / h
            };
        }
        let mut r = v + dt * (adv + src[node]);
        if dim == 2 {
            let a12 = a[node][0][1];
            if a12 != 0.0 {
                let (s0, s1) = (strides[0], strides[1]);
                let mixed = (prev[node + s0 + s1] - prev[node + s0 - s1] - prev[node - s0 + s1]
                    + prev[node - s0 - s1])
                    / (4.0 * h * h);
                r += dt * 2.0 * a12 * mixed;
            }
        }
        rhs[node] = r;
    }

    let ok = if dim == 1 {
        sc.line_solve(grid, |node| a[node][0][0], &rhs, g, 0, 1, next)
    } else {
        // sweep along x1 for every interior x2 column, then along x2
        let mut tmp = vec![0.0; grid.n_nodes()];
        tmp.copy_from_slice(g);
        for j in 1..m - 1 {
            if !sc.line_solve(grid, |node| a[node][0][0], &rhs, g, j, m, &mut tmp) {
                sc.half = rhs;
                return Err(j);
            }
        }
        next.copy_from_slice(g);
        let mut ok = true;
        for i in 1..m - 1 {
            if !sc.line_solve(grid, |node| a[node][1][1], &tmp, g, i * m, 1, next) {
                ok = false;
                break;
            }
        }
        ok
    };
    sc.half = rhs;
    if ok {
        Ok(())
    } else {
        Err(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_scenario;
    use crate::math::{cos, exp};

    fn field(name: &str) -> DiffusionMatrixField {
        let spec = builtin_scenario(name).unwrap();
        DiffusionMatrixField::new(&spec, [(0.0, [0.0; MAX_DIM])]).unwrap()
    }

    #[test]
    fn thomas_matches_dense_solution() {
        let y = solve_tridiagonal(&[0.0, -1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0, 0.0], &[1.0, 0.0, 1.0])
            .unwrap();
        for v in y {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(solve_tridiagonal(&[0.0], &[0.0], &[0.0], &[1.0]).is_none());
    }

    #[test]
    fn heat_oracle_on_half_period() {
        let grid = Grid::new(1, core::f64::consts::FRAC_PI_2, 201, 1000, 1.0).unwrap();
        let a = field("heat-oracle");
        let n = grid.n_nodes();
        let g: Vec<f64> = (0..n).map(|i| cos(grid.coord(i))).collect();
        let zeros = vec![0.0; grid.levels() * n];
        let sol = linear_parabolic_solve(&grid, &a, &zeros, &zeros, &g).unwrap();
        let v = sol.values[grid.time_steps * n + 100];
        assert!((v - exp(-1.0)).abs() < 1e-3, "{v}");
    }

    #[test]
    fn linear_and_constant_data_are_preserved() {
        let grid = Grid::new(1, 2.0, 41, 50, 1.0).unwrap();
        let a = field("linear-oracle");
        let n = grid.n_nodes();
        let zeros = vec![0.0; grid.levels() * n];
        let g: Vec<f64> = (0..n).map(|i| grid.coord(i)).collect();
        let sol = linear_parabolic_solve(&grid, &a, &zeros, &zeros, &g).unwrap();
        for level in 0..grid.levels() {
            for i in 0..n {
                assert!((sol.values[level * n + i] - g[i]).abs() < 1e-13);
            }
        }
        let c = vec![5.0; n];
        let sol = linear_parabolic_solve(&grid, &a, &zeros, &zeros, &c).unwrap();
        assert!(sol.values.iter().all(|v| (v - 5.0).abs() < 1e-13));
    }

    #[test]
    fn cfl_violation_names_node() {
        let grid = Grid::new(1, 1.0, 11, 2, 1.0).unwrap();
        let a = field("linear-oracle");
        let n = grid.n_nodes();
        let mut drift = vec![0.0; grid.levels() * n];
        drift[3] = 1.0; // dt*|f|/h = 0.5*1/0.2 > 1
        let zeros = vec![0.0; grid.levels() * n];
        let err = linear_parabolic_solve(&grid, &a, &drift, &zeros, &vec![0.0; n]).unwrap_err();
        match err {
            SolverError::Cfl { ratio, level, x } => {
                assert_eq!(level, 0);
                assert!((x[0] - grid.coord(3)).abs() < 1e-15);
                assert!((ratio - 2.5).abs() < 1e-12);
            }
            e => panic!("{e:?}"),
        }
    }
}
