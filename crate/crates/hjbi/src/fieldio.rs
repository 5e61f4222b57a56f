//! Field dumps: one CSV row per (time level, node) in row-major node order,
//! header `s,x1[,x2],V1,V2,dV1_dx1[,dV1_dx2],dV2_dx1[,dV2_dx2]`.

use hjbi_core::{Grid, Player, ValueField};

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("field CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("field CSV line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("field CSV: {0}")]
    Shape(String),
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["s".to_string()];
    h.extend((1..=dim).map(|d| format!("x{d}")));
    h.push("V1".into());
    h.push("V2".into());
    for i in 1..=2 {
        h.extend((1..=dim).map(|d| format!("dV{i}_dx{d}")));
    }
    h
}

pub fn write_field_csv(field: &ValueField) -> Vec<u8> {
    let grid = field.grid();
    let (n, dim) = (grid.n_nodes(), grid.dim);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header(dim)).expect("in-memory write");
    let mut row: Vec<String> = Vec::with_capacity(3 + 3 * dim);
    for k in 0..grid.levels() {
        let s = fmt_f64(grid.s(k));
        for node in 0..n {
            row.clear();
            row.push(s.clone());
            let x = grid.node_coords(node);
            row.extend(x[..dim].iter().map(|v| fmt_f64(*v)));
            for p in Player::BOTH {
                row.push(fmt_f64(field.value(p, k, node)));
            }
            for p in Player::BOTH {
                let g = field.gradient(p, k, node);
                row.extend(g[..dim].iter().map(|v| fmt_f64(*v)));
            }
            w.write_record(&row).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

/// A field read back from CSV. Gradients are recomputed from the values;
/// `stale_gradient` is the largest disagreement with the stored columns.
pub struct LoadedField {
    pub field: ValueField,
    pub stale_gradient: f64,
}

pub fn read_field_csv(bytes: &[u8]) -> Result<LoadedField, FieldError> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let dim = match head.len() {
        6 => 1,
        9 => 2,
        k => return Err(FieldError::Shape(format!("{k} columns; expected 6 (N=1) or 9 (N=2)"))),
    };
    if head != header(dim) {
        return Err(FieldError::Shape(format!("unexpected header {}", head.join(","))));
    }
    let mut s = Vec::new();
    let mut xs: Vec<[f64; 2]> = Vec::new();
    let mut vals: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut grads: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let nums = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| FieldError::Row { line, msg: e.to_string() })?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::Row { line, msg: "non-finite entry".into() });
        }
        s.push(nums[0]);
        let mut x = [0.0; 2];
        x[..dim].copy_from_slice(&nums[1..1 + dim]);
        xs.push(x);
        vals[0].push(nums[1 + dim]);
        vals[1].push(nums[2 + dim]);
        grads[0].extend_from_slice(&nums[3 + dim..3 + 2 * dim]);
        grads[1].extend_from_slice(&nums[3 + 2 * dim..3 + 3 * dim]);
    }
    if s.is_empty() {
        return Err(FieldError::Shape("no rows".into()));
    }
    let n = s.iter().take_while(|v| **v == s[0]).count();
    if s.len() % n != 0 {
        return Err(FieldError::Shape(format!("{} rows do not split into levels of {n} nodes", s.len())));
    }
    let levels = s.len() / n;
    let m = (n as f64).powf(1.0 / dim as f64).round() as usize;
    if m.pow(dim as u32) != n || levels < 2 {
        return Err(FieldError::Shape(format!("{n} nodes per level over {levels} levels is not a grid")));
    }
    let radius = -xs[0][0];
    let horizon = s[s.len() - 1];
    let grid = Grid::new(dim, radius, m, levels - 1, horizon).map_err(|e| FieldError::Shape(e.to_string()))?;
    let tol = 1e-9 * (1.0 + radius.abs().max(horizon.abs()));
    for (j, (sj, xj)) in s.iter().zip(&xs).enumerate() {
        let (k, node) = (j / n, j % n);
        let want = grid.node_coords(node);
        if (sj - grid.s(k)).abs() > tol || (0..dim).any(|d| (xj[d] - want[d]).abs() > tol) {
            return Err(FieldError::Row {
                line: j as u64 + 2,
                msg: "coordinates are not a uniform row-major grid".into(),
            });
        }
    }
    let field = ValueField::from_values(grid, vals).map_err(|e| FieldError::Shape(e.to_string()))?;
    let mut stale: f64 = 0.0;
    for p in Player::BOTH {
        for (a, b) in field.gradients(p).iter().zip(&grads[p.index()]) {
            stale = stale.max((a - b).abs());
        }
    }
    Ok(LoadedField { field, stale_gradient: stale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field(dim: usize) -> ValueField {
        let grid = Grid::new(dim, 1.5, 7, 3, 0.75).unwrap();
        let n = grid.levels() * grid.n_nodes();
        let v1: Vec<f64> = (0..n).map(|j| (j as f64 * 0.37).sin() / 3.0).collect();
        let v2: Vec<f64> = (0..n).map(|j| 1e-7 * j as f64 - 0.1).collect();
        ValueField::from_values(grid, [v1, v2]).unwrap()
    }

    #[test]
    fn round_trips_bitwise() {
        for dim in [1, 2] {
            let f = sample_field(dim);
            let bytes = write_field_csv(&f);
            let text = String::from_utf8(bytes.clone()).unwrap();
            let first = text.lines().next().unwrap();
            let want = if dim == 1 { "s,x1,V1,V2,dV1_dx1,dV2_dx1" } else { "s,x1,x2,V1,V2,dV1_dx1,dV1_dx2,dV2_dx1,dV2_dx2" };
            assert_eq!(first, want);
            let back = read_field_csv(&bytes).unwrap();
            assert_eq!(back.field, f);
            assert_eq!(back.stale_gradient, 0.0);
            assert_eq!(write_field_csv(&back.field), bytes);
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let good = String::from_utf8(write_field_csv(&sample_field(1))).unwrap();
        let mut lines: Vec<&str> = good.lines().collect();
        lines.pop();
        assert!(read_field_csv(lines.join("\n").as_bytes()).is_err());
        assert!(read_field_csv(good.replacen("V1", "W1", 1).as_bytes()).is_err());
        assert!(read_field_csv(good.replacen("-1.5", "oops", 1).as_bytes()).is_err());
        assert!(read_field_csv(b"s,x1,V1,V2,dV1_dx1,dV2_dx1\n").is_err());
    }
}
