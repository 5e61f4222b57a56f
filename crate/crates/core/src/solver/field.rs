use super::{Grid, SolverError};
use crate::math::floor;
use crate::model::{Player, MAX_DIM};
use alloc::vec;
use alloc::vec::Vec;

/// Value functions of both players with their gradients, stored in inverted
/// time `s` (level 0 carries `g_i`). Index layout is `level * n_nodes + node`,
/// gradients add a trailing axis of length `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    grid: Grid,
    values: [Vec<f64>; 2],
    gradients: [Vec<f64>; 2],
}

/// Interpolated read of a field at an arbitrary point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub gradient: [f64; MAX_DIM],
    /// False when `x` lay outside the box and was clamped onto it.
    pub inside: bool,
}

const STENCIL: usize = 2 << MAX_DIM;

/// Flat indices and weights of a space-time multilinear read.
struct Stencil {
    at: [usize; STENCIL],
    weight: [f64; STENCIL],
    len: usize,
    inside: bool,
}

impl ValueField {
    /// Builds a field from node values; gradients are recomputed.
    pub fn from_values(grid: Grid, values: [Vec<f64>; 2]) -> Result<ValueField, SolverError> {
        let n = grid.levels() * grid.n_nodes();
        if values.iter().any(|v| v.len() != n) {
            return Err(SolverError::InvalidInput(alloc::format!(
                "field needs {n} values per player"
            )));
        }
        let gradients = [gradient_of(&grid, &values[0]), gradient_of(&grid, &values[1])];
        Ok(ValueField { grid, values, gradients })
    }

    pub(crate) fn from_parts(grid: Grid, values: [Vec<f64>; 2], gradients: [Vec<f64>; 2]) -> Self {
        ValueField { grid, values, gradients }
    }

    /// `V_i(s, x) = g_i(x)` for every level.
    pub fn constant_in_time(grid: Grid, terminal: [&[f64]; 2]) -> ValueField {
        let values = terminal.map(|g| {
            let mut v = Vec::with_capacity(grid.levels() * g.len());
            for _ in 0..grid.levels() {
                v.extend_from_slice(g);
            }
            v
        });
        let gradients = [gradient_of(&grid, &values[0]), gradient_of(&grid, &values[1])];
        ValueField { grid, values, gradients }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self, player: Player) -> &[f64] {
        &self.values[player.index()]
    }

    pub fn gradients(&self, player: Player) -> &[f64] {
        &self.gradients[player.index()]
    }

    pub fn level_values(&self, player: Player, level: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[player.index()][level * n..(level + 1) * n]
    }

    #[inline]
    pub fn value(&self, player: Player, level: usize, node: usize) -> f64 {
        self.values[player.index()][level * self.grid.n_nodes() + node]
    }

    #[inline]
    pub fn gradient(&self, player: Player, level: usize, node: usize) -> [f64; MAX_DIM] {
        let dim = self.grid.dim;
        let base = (level * self.grid.n_nodes() + node) * dim;
        let g = &self.gradients[player.index()][base..base + dim];
        let mut out = [0.0; MAX_DIM];
        out[..dim].copy_from_slice(g);
        out
    }

    /// Multilinear read in space, linear in `s`, at inverted time `s`.
    /// Points outside the box are clamped onto it.
    pub fn sample(&self, player: Player, s: f64, x: &[f64]) -> FieldSample {
        self.read(player, &self.stencil(s, x))
    }

    /// Both players at one point, sharing the interpolation weights.
    pub fn sample_pair(&self, s: f64, x: &[f64]) -> [FieldSample; 2] {
        let st = self.stencil(s, x);
        [self.read(Player::One, &st), self.read(Player::Two, &st)]
    }

    fn stencil(&self, s: f64, x: &[f64]) -> Stencil {
        let g = &self.grid;
        let n = g.n_nodes();
        let dim = g.dim;
        let (k0, k1, wt) = self.time_bracket(s);

        let mut inside = true;
        let mut lo = [0usize; MAX_DIM];
        let mut w = [0.0; MAX_DIM];
        for d in 0..dim {
            let mut xd = x[d];
            if !(xd >= -g.radius && xd <= g.radius) {
                inside = false;
                xd = if xd.is_nan() { 0.0 } else { xd.clamp(-g.radius, g.radius) };
            }
            let pos = (xd + g.radius) / g.spacing();
            let i = (floor(pos) as usize).min(g.nodes_per_axis - 2);
            lo[d] = i;
            w[d] = (pos - i as f64).clamp(0.0, 1.0);
        }

        let mut st = Stencil { at: [0; STENCIL], weight: [0.0; STENCIL], len: 0, inside };
        for c in 0..(1usize << dim) {
            let mut idx = [0usize; MAX_DIM];
            let mut weight = 1.0;
            for d in 0..dim {
                let up = (c >> d) & 1 == 1;
                idx[d] = lo[d] + up as usize;
                weight *= if up { w[d] } else { 1.0 - w[d] };
            }
            if weight == 0.0 {
                continue;
            }
            let node = g.node_index(idx);
            for (k, wk) in [(k0, 1.0 - wt), (k1, wt)] {
                if wk == 0.0 {
                    continue;
                }
                st.at[st.len] = k * n + node;
                st.weight[st.len] = weight * wk;
                st.len += 1;
            }
        }
        st
    }

    fn read(&self, player: Player, st: &Stencil) -> FieldSample {
        let dim = self.grid.dim;
        let vals = &self.values[player.index()];
        let grads = &self.gradients[player.index()];
        let mut value = 0.0;
        let mut gradient = [0.0; MAX_DIM];
        for j in 0..st.len {
            let (at, ww) = (st.at[j], st.weight[j]);
            value += ww * vals[at];
            for d in 0..dim {
                gradient[d] += ww * grads[at * dim + d];
            }
        }
        FieldSample { value, gradient, inside: st.inside }
    }

    /// Both players at physical time `t`.
    pub fn sample_pair_physical(&self, t: f64, x: &[f64]) -> [FieldSample; 2] {
        self.sample_pair(self.grid.horizon - t, x)
    }

    /// Read at physical time `t`, i.e. `w_i(t, x) = V_i(T − t, x)`.
    pub fn sample_physical(&self, player: Player, t: f64, x: &[f64]) -> FieldSample {
        self.sample(player, self.grid.horizon - t, x)
    }

    fn time_bracket(&self, s: f64) -> (usize, usize, f64) {
        let g = &self.grid;
        let pos = (s / g.dt()).clamp(0.0, g.time_steps as f64);
        let r = crate::math::round(pos);
        // snap to a level when the MC grid is aligned with the PDE grid
        if (pos - r).abs() <= 1e-9 * (1.0 + r) {
            let k = r as usize;
            return (k, k, 0.0);
        }
        let k0 = (floor(pos) as usize).min(g.time_steps - 1);
        (k0, k0 + 1, pos - k0 as f64)
    }

    /// Sup over `|x|_∞ ≤ core_radius`, all levels and both players of
    /// `|V − V'|`; grids must share spacing and time levels.
    pub fn core_sup_difference(&self, other: &ValueField, core_radius: f64) -> Result<f64, SolverError> {
        let (a, b) = (&self.grid, &other.grid);
        if a.dim != b.dim
            || a.time_steps != b.time_steps
            || a.spacing() != b.spacing()
            || a.horizon != b.horizon
        {
            return Err(SolverError::InvalidInput("grids are not nested".into()));
        }
        let h = a.spacing();
        let half = (floor(core_radius / h + 1e-9) as usize)
            .min((a.nodes_per_axis - 1) / 2)
            .min((b.nodes_per_axis - 1) / 2);
        let (ca, cb) = ((a.nodes_per_axis - 1) / 2, (b.nodes_per_axis - 1) / 2);
        let mut sup: f64 = 0.0;
        let span = 2 * half + 1;
        let count = if a.dim == 1 { span } else { span * span };
        for p in Player::BOTH {
            for level in 0..a.levels() {
                for m in 0..count {
                    let off = if a.dim == 1 { [m, 0] } else { [m / span, m % span] };
                    let mut ia = [0usize; MAX_DIM];
                    let mut ib = [0usize; MAX_DIM];
                    for d in 0..a.dim {
                        ia[d] = ca - half + off[d];
                        ib[d] = cb - half + off[d];
                    }
                    let va = self.value(p, level, a.node_index(ia));
                    let vb = other.value(p, level, b.node_index(ib));
                    sup = sup.max((va - vb).abs());
                }
            }
        }
        Ok(sup)
    }

    /// `(sup |ΔV|, sup |Δ∇V|)` over both players, all levels and nodes.
    pub fn sup_changes(&self, other: &ValueField) -> (f64, f64) {
        let sup = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        let dv = sup(&self.values[0], &other.values[0]).max(sup(&self.values[1], &other.values[1]));
        let dg = sup(&self.gradients[0], &other.gradients[0])
            .max(sup(&self.gradients[1], &other.gradients[1]));
        (dv, dg)
    }
}

/// Central differences inside, one-sided first differences on boundary nodes.
pub(crate) fn gradient_of(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let n = grid.n_nodes();
    let dim = grid.dim;
    let mut out = vec![0.0; values.len() * dim];
    for level in 0..values.len() / n {
        let v = &values[level * n..(level + 1) * n];
        let o = &mut out[level * n * dim..(level + 1) * n * dim];
        level_gradient(grid, v, o);
    }
    out
}

pub(crate) fn level_gradient(grid: &Grid, v: &[f64], out: &mut [f64]) {
    let m = grid.nodes_per_axis;
    let h = grid.spacing();
    let dim = grid.dim;
    for node in 0..grid.n_nodes() {
        let idx = grid.axis_indices(node);
        for d in 0..dim {
            let stride = if dim == 1 || d == 1 { 1 } else { m };
            let i = idx[d];
            out[node * dim + d] = if i == 0 {
                (v[node + stride] - v[node]) / h
            } else if i + 1 == m {
                (v[node] - v[node - stride]) / h
            } else {
                (v[node + stride] - v[node - stride]) / (2.0 * h)
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_field(grid: Grid) -> ValueField {
        let n = grid.n_nodes();
        let mut v = Vec::new();
        for level in 0..grid.levels() {
            for node in 0..n {
                let x = grid.node_coords(node);
                v.push(2.0 * x[0] - x[1] + grid.s(level));
            }
        }
        ValueField::from_values(grid, [v.clone(), v]).unwrap()
    }

    #[test]
    fn gradients_of_linear_data_are_exact() {
        let grid = Grid::new(2, 1.0, 9, 4, 1.0).unwrap();
        let f = linear_field(grid);
        for node in 0..grid.n_nodes() {
            let g = f.gradient(Player::One, 2, node);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn interpolation_reproduces_multilinear_data() {
        let grid = Grid::new(2, 1.0, 9, 4, 1.0).unwrap();
        let f = linear_field(grid);
        let smp = f.sample(Player::Two, 0.6, &[0.33, -0.71]);
        assert!(smp.inside);
        assert!((smp.value - (0.66 + 0.71 + 0.6)).abs() < 1e-12);
        let out = f.sample(Player::Two, 0.0, &[3.0, 0.0]);
        assert!(!out.inside);
        assert!((out.value - 2.0).abs() < 1e-12);
        let phys = f.sample_physical(Player::One, 0.25, &[0.0, 0.0]);
        assert!((phys.value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn one_sided_at_boundary() {
        let grid = Grid::new(1, 1.0, 5, 1, 1.0).unwrap();
        let v: Vec<f64> = (0..2).flat_map(|_| (0..5).map(|i| grid.coord(i) * grid.coord(i))).collect();
        let f = ValueField::from_values(grid, [v.clone(), v]).unwrap();
        assert_eq!(f.gradient(Player::One, 0, 0)[0], (0.25 - 1.0) / 0.5);
        assert_eq!(f.gradient(Player::One, 0, 2)[0], 0.0);
    }
}
