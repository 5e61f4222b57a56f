use super::field::ValueField;
use super::SolverError;
use crate::feedback::{hamiltonian_unchecked, resolve_feedback, FeedbackResolver};
use crate::math::{pow, sqrt};
use crate::model::{DiffusionMatrixField, GameSpec, Player, Structure, MAX_DIM};
use crate::par_map;
use alloc::vec;
use alloc::vec::Vec;

/// Consistency residual of a discrete solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidualStats {
    pub sup: [f64; 2],
    pub mean_abs: [f64; 2],
    /// Interior space-time points that entered the statistics.
    pub evaluated: [usize; 2],
    /// Points skipped because the switching argument lay inside the band.
    pub in_band: [usize; 2],
    /// Switching band half-width `√h · sup|f_i|` (0 for non-affine games).
    pub band: [f64; 2],
}

/// Time-centred residual of the HJBI equations on interior nodes:
/// `(V^{k+1} − V^k)/dt − ½ Σ_{l=k,k+1} [Σ a_hk D_hk V^l + H_i(∇V^l, ū(∇V^l))]`,
/// with the solver's central stencils. For affine games, points where the
/// switching argument of player i is within the band are counted separately.
pub fn residual(
    spec: &GameSpec,
    field: &ValueField,
    resolver: &FeedbackResolver,
) -> Result<ResidualStats, SolverError> {
    let grid = *field.grid();
    let (n, dim, m) = (grid.n_nodes(), grid.dim, grid.nodes_per_axis);
    let h = grid.spacing();
    let strides = [if dim == 1 { 1 } else { m }, 1];
    let a_field = DiffusionMatrixField::new(spec, [(0.0, [0.0; MAX_DIM])])?;
    let affine = spec.structure.is_affine();

    struct Level {
        op: [Vec<f64>; 2],
        switch: [Vec<f64>; 2],
        f_sup: [f64; 2],
    }

    let per_level = par_map(grid.levels(), |k| -> Result<Level, SolverError> {
        let t = grid.horizon - grid.s(k);
        let mut out = Level {
            op: [vec![0.0; n], vec![0.0; n]],
            switch: [vec![f64::INFINITY; n], vec![f64::INFINITY; n]],
            f_sup: [0.0; 2],
        };
        let v = [field.level_values(Player::One, k), field.level_values(Player::Two, k)];
        for node in 0..n {
            if grid.is_boundary(node) {
                continue;
            }
            let x = grid.node_coords(node);
            let xs = &x[..dim];
            let a = a_field.at(t, xs);
            let p = [field.gradient(Player::One, k, node), field.gradient(Player::Two, k, node)];
            let (u1, u2) = resolve_feedback(resolver, spec, t, xs, &p[0][..dim], &p[1][..dim])
                .map_err(|source| SolverError::Feedback { t, x, source })?;
            for player in Player::BOTH {
                let i = player.index();
                let vi = v[i];
                let mut diff = 0.0;
                for d in 0..dim {
                    let s = strides[d];
                    diff += a[d][d] * (vi[node + s] - 2.0 * vi[node] + vi[node - s]) / (h * h);
                }
                if dim == 2 {
                    let (s0, s1) = (strides[0], strides[1]);
                    let mixed = (vi[node + s0 + s1] - vi[node + s0 - s1] - vi[node - s0 + s1]
                        + vi[node - s0 - s1])
                        / (4.0 * h * h);
                    diff += 2.0 * a[0][1] * mixed;
                }
                let ham = hamiltonian_unchecked(spec, player, t, xs, &p[i][..dim], u1, u2);
                out.op[i][node] = diff + ham;
                if affine {
                    out.switch[i][node] = spec.switching_argument(player, t, xs, &p[i][..dim]).abs();
                    let (on, off) = match player {
                        Player::One => (spec.drift_at(t, xs, 1.0, 0.0), spec.drift_at(t, xs, 0.0, 0.0)),
                        Player::Two => (spec.drift_at(t, xs, 0.0, 1.0), spec.drift_at(t, xs, 0.0, 0.0)),
                    };
                    let norm = sqrt((0..dim).map(|d| (on[d] - off[d]) * (on[d] - off[d])).sum());
                    out.f_sup[i] = out.f_sup[i].max(norm);
                }
            }
        }
        Ok(out)
    });
    let levels: Vec<Level> = per_level.into_iter().collect::<Result<_, _>>()?;

    let mut stats = ResidualStats::default();
    for i in 0..2 {
        let f_sup = levels.iter().fold(0.0f64, |acc, l| acc.max(l.f_sup[i]));
        stats.band[i] = if affine { sqrt(h) * f_sup } else { 0.0 };
    }
    let dt = grid.dt();
    let mut sum = [0.0; 2];
    for k in 0..grid.time_steps {
        for node in 0..n {
            if grid.is_boundary(node) {
                continue;
            }
            for player in Player::BOTH {
                let i = player.index();
                let (lo, hi) = (&levels[k], &levels[k + 1]);
                if lo.switch[i][node] < stats.band[i] || hi.switch[i][node] < stats.band[i] {
                    stats.in_band[i] += 1;
                    continue;
                }
                let dv = (field.value(player, k + 1, node) - field.value(player, k, node)) / dt;
                let r = (dv - 0.5 * (lo.op[i][node] + hi.op[i][node])).abs();
                stats.sup[i] = stats.sup[i].max(r);
                sum[i] += r;
                stats.evaluated[i] += 1;
            }
        }
    }
    for i in 0..2 {
        if stats.evaluated[i] > 0 {
            stats.mean_abs[i] = sum[i] / stats.evaluated[i] as f64;
        }
    }
    Ok(stats)
}

/// `min_i (sup|g_i| + T·sup|h_i| − sup|V_i|)` over nodes, sampled time levels
/// and the control grids. Nonnegative certifies the discrete maximum principle.
pub fn max_principle_check(spec: &GameSpec, field: &ValueField) -> Result<f64, SolverError> {
    if spec.structure == Structure::AffineUnbounded {
        return Err(SolverError::UnboundedData);
    }
    let grid = *field.grid();
    let (n, dim) = (grid.n_nodes(), grid.dim);
    let stride = (grid.levels() / 64).max(1);
    let levels: Vec<usize> =
        (0..grid.levels()).filter(|k| k % stride == 0 || *k == grid.time_steps).collect();
    let grids = [spec.controls[0].grid(), spec.controls[1].grid()];
    let h_sup = par_map(levels.len(), |j| {
        let t = grid.horizon - grid.s(levels[j]);
        let mut sup = [0.0f64; 2];
        for node in 0..n {
            let x = grid.node_coords(node);
            for &u1 in &grids[0] {
                for &u2 in &grids[1] {
                    for p in Player::BOTH {
                        let hv = spec.running_at(p, t, &x[..dim], u1, u2).abs();
                        // NaN poisons the bound
                        if !(hv <= sup[p.index()]) {
                            sup[p.index()] = hv;
                        }
                    }
                }
            }
        }
        sup
    })
    .into_iter()
    .fold([0.0f64; 2], |acc, s| [acc[0].max(s[0]), acc[1].max(s[1])]);

    let mut margin = f64::INFINITY;
    for p in Player::BOTH {
        let i = p.index();
        let g_sup = (0..n)
            .map(|node| spec.terminal_at(p, &grid.node_coords(node)[..dim]).abs())
            .fold(0.0f64, f64::max);
        let v_sup = field.values(p).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        margin = margin.min(g_sup + spec.horizon * h_sup[i] - v_sup);
    }
    Ok(margin)
}

/// `max |V_i(s,x)| / (1 + |x|^β)` over both players, all levels and nodes.
pub fn growth_check(spec: &GameSpec, field: &ValueField) -> f64 {
    let grid = field.grid();
    let (n, dim) = (grid.n_nodes(), grid.dim);
    let weight: Vec<f64> = (0..n)
        .map(|node| {
            let x = grid.node_coords(node);
            let r = sqrt((0..dim).map(|d| x[d] * x[d]).sum());
            1.0 / (1.0 + pow(r, spec.growth_exponent))
        })
        .collect();
    let mut c: f64 = 0.0;
    for p in Player::BOTH {
        for (j, v) in field.values(p).iter().enumerate() {
            c = c.max(v.abs() * weight[j % n]);
        }
    }
    c
}
