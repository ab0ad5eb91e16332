//! File formats: the `HBS1` container for compressed matrices and inverses,
//! raw `DMAT` dense dumps, and grid / vector CSV files.
//!
//! All binary numbers are little-endian; matrices are stored row-major.
//!
//! `HBS1` layout: magic `HBS1`, `u8` kind (0 matrix, 1 inverse), `u8` flags
//! (bit 0 interpolatory), two zero bytes, `u64` N, `u32` levels,
//! `u32` target leaf. Then one record per node `1..2^(L+1)`: `u32` node id,
//! `u8` role tag, a fixed sequence of blocks (`u32` rows, `u32` cols, data),
//! and for matrices the row and column skeletons (`u32` length, `u32`s).

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::hbs::{HbsMatrix, HbsNode};
use crate::invert::{HbsInverse, InverseNode};
use crate::quadrature::{DenseMatrix, QuadratureGrid};
use crate::tree::{IndexTree, ROOT};

const HBS_MAGIC: &[u8; 4] = b"HBS1";
const DMAT_MAGIC: &[u8; 4] = b"DMAT";
const KIND_MATRIX: u8 = 0;
const KIND_INVERSE: u8 = 1;

/// Role tags of node records; inverse records use a separate range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordRole {
    Root = 1,
    Parent = 2,
    Leaf = 3,
    InverseRoot = 0x11,
    InverseParent = 0x12,
    InverseLeaf = 0x13,
}

impl RecordRole {
    fn expected(tree: &IndexTree, tau: usize, inverse: bool) -> Self {
        let base = if tau == ROOT && tree.levels() > 0 {
            Self::Root
        } else if tree.is_leaf(tau) {
            Self::Leaf
        } else {
            Self::Parent
        };
        if !inverse {
            return base;
        }
        match base {
            Self::Root => Self::InverseRoot,
            Self::Parent => Self::InverseParent,
            _ => Self::InverseLeaf,
        }
    }
}

fn fmt_err(format: &'static str, msg: impl Into<String>) -> Error {
    Error::Format {
        format,
        msg: msg.into(),
    }
}

/// Reader that turns short reads into format errors.
struct Cursor<R> {
    inner: R,
    format: &'static str,
}

impl<R: Read> Cursor<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut buf = [0u8; K];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => fmt_err(self.format, "truncated file"),
                _ => Error::Io(e),
            })?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn at_end(&mut self) -> Result<bool> {
        let mut b = [0u8; 1];
        Ok(self.inner.read(&mut b)? == 0)
    }

    /// Row-major payload with `limit` guarding against absurd allocations.
    fn matrix_body(&mut self, rows: usize, cols: usize, limit: usize) -> Result<DenseMatrix> {
        if rows.saturating_mul(cols) > limit {
            return Err(fmt_err(
                self.format,
                format!("block {rows}x{cols} exceeds size bound"),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok(DenseMatrix::from_row_slice(rows, cols, &data))
    }

    fn block(&mut self, limit: usize) -> Result<DenseMatrix> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        self.matrix_body(rows, cols, limit)
    }

    fn indices(&mut self, limit: usize) -> Result<Vec<usize>> {
        let len = self.u32()? as usize;
        if len > limit {
            return Err(fmt_err(self.format, "skeleton longer than the matrix"));
        }
        (0..len).map(|_| Ok(self.u32()? as usize)).collect()
    }
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v =
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_matrix_body(w: &mut impl Write, m: &DenseMatrix) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn put_block(w: &mut impl Write, m: &DenseMatrix) -> Result<()> {
    put_u32(w, m.nrows())?;
    put_u32(w, m.ncols())?;
    put_matrix_body(w, m)
}

fn put_header(w: &mut impl Write, kind: u8, flags: u8, tree: &IndexTree) -> Result<()> {
    w.write_all(HBS_MAGIC)?;
    w.write_all(&[kind, flags, 0, 0])?;
    w.write_all(&(tree.size() as u64).to_le_bytes())?;
    put_u32(w, tree.levels())?;
    put_u32(w, tree.target_leaf())?;
    Ok(())
}

fn read_header<R: Read>(c: &mut Cursor<R>, kind: u8) -> Result<(IndexTree, u8)> {
    if &c.bytes::<4>()? != HBS_MAGIC {
        return Err(fmt_err("HBS1", "bad magic"));
    }
    let [k, flags, _, _] = c.bytes::<4>()?;
    if k != kind {
        return Err(fmt_err("HBS1", format!("expected kind {kind}, found {k}")));
    }
    let n = usize::try_from(c.u64()?).map_err(|_| fmt_err("HBS1", "size overflows"))?;
    let levels = c.u32()? as usize;
    let leaf = c.u32()? as usize;
    if levels >= usize::BITS as usize - 1 || n >> levels == 0 {
        return Err(fmt_err(
            "HBS1",
            format!("{levels} levels do not fit {n} indices"),
        ));
    }
    let tree =
        IndexTree::with_levels(n, levels, leaf).map_err(|e| fmt_err("HBS1", e.to_string()))?;
    Ok((tree, flags))
}

fn read_record_head<R: Read>(
    c: &mut Cursor<R>,
    tree: &IndexTree,
    tau: usize,
    inverse: bool,
) -> Result<()> {
    let id = c.u32()? as usize;
    if id != tau {
        return Err(fmt_err("HBS1", format!("expected node {tau}, found {id}")));
    }
    let role = c.u8()?;
    let want = RecordRole::expected(tree, tau, inverse);
    if role != want as u8 {
        return Err(fmt_err(
            "HBS1",
            format!("node {tau}: role tag {role:#x}, expected {:#x}", want as u8),
        ));
    }
    Ok(())
}

pub fn write_hbs(w: &mut impl Write, a: &HbsMatrix) -> Result<()> {
    let tree = a.tree();
    put_header(w, KIND_MATRIX, a.is_interpolatory() as u8, tree)?;
    for tau in tree.nodes() {
        let n = a.node(tau);
        put_u32(w, tau)?;
        w.write_all(&[RecordRole::expected(tree, tau, false) as u8])?;
        for m in [&n.u, &n.v, &n.d, &n.b12, &n.b21] {
            put_block(w, m)?;
        }
        for s in [&n.row_skeleton, &n.col_skeleton] {
            put_u32(w, s.len())?;
            for &i in s {
                put_u32(w, i)?;
            }
        }
    }
    Ok(())
}

pub fn read_hbs(r: impl Read) -> Result<HbsMatrix> {
    let mut c = Cursor {
        inner: r,
        format: "HBS1",
    };
    let (tree, flags) = read_header(&mut c, KIND_MATRIX)?;
    let limit = tree.size().saturating_mul(tree.size());
    let mut nodes = vec![HbsNode::default()];
    for tau in tree.nodes() {
        read_record_head(&mut c, &tree, tau, false)?;
        let mut n = HbsNode {
            u: c.block(limit)?,
            v: c.block(limit)?,
            d: c.block(limit)?,
            b12: c.block(limit)?,
            b21: c.block(limit)?,
            ..HbsNode::default()
        };
        n.row_skeleton = c.indices(tree.size())?;
        n.col_skeleton = c.indices(tree.size())?;
        nodes.push(n);
    }
    if !c.at_end()? {
        return Err(fmt_err("HBS1", "trailing bytes"));
    }
    let a = HbsMatrix::from_parts(tree, nodes, flags & 1 == 1)?;
    if let Some(v) = a.validate().first() {
        return Err(fmt_err("HBS1", v.to_string()));
    }
    Ok(a)
}

pub fn write_inverse(w: &mut impl Write, inv: &HbsInverse) -> Result<()> {
    let tree = inv.tree();
    put_header(w, KIND_INVERSE, 0, tree)?;
    for tau in tree.nodes() {
        let n = inv.node(tau);
        put_u32(w, tau)?;
        w.write_all(&[RecordRole::expected(tree, tau, true) as u8])?;
        for m in [&n.e, &n.f, &n.g, &n.dhat] {
            put_block(w, m)?;
        }
    }
    Ok(())
}

pub fn read_inverse(r: impl Read) -> Result<HbsInverse> {
    let mut c = Cursor {
        inner: r,
        format: "HBS1",
    };
    let (tree, _) = read_header(&mut c, KIND_INVERSE)?;
    let limit = tree.size().saturating_mul(tree.size());
    let mut nodes = vec![InverseNode::default()];
    for tau in tree.nodes() {
        read_record_head(&mut c, &tree, tau, true)?;
        nodes.push(InverseNode {
            e: c.block(limit)?,
            f: c.block(limit)?,
            g: c.block(limit)?,
            dhat: c.block(limit)?,
        });
    }
    if !c.at_end()? {
        return Err(fmt_err("HBS1", "trailing bytes"));
    }
    HbsInverse::from_parts(tree, nodes)
}

/// Dense dump: `DMAT`, `u32` rows, `u32` cols, four zero bytes, then data.
pub fn write_dense(w: &mut impl Write, m: &DenseMatrix) -> Result<()> {
    w.write_all(DMAT_MAGIC)?;
    put_u32(w, m.nrows())?;
    put_u32(w, m.ncols())?;
    w.write_all(&[0; 4])?;
    put_matrix_body(w, m)
}

pub fn read_dense(r: impl Read) -> Result<DenseMatrix> {
    let mut c = Cursor {
        inner: r,
        format: "DMAT",
    };
    if &c.bytes::<4>()? != DMAT_MAGIC {
        return Err(fmt_err("DMAT", "bad magic"));
    }
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    c.bytes::<4>()?;
    let m = c.matrix_body(rows, cols, usize::MAX)?;
    if !c.at_end()? {
        return Err(fmt_err("DMAT", "trailing bytes"));
    }
    Ok(m)
}

pub const GRID_HEADER: &str = "t,x,y,nx,ny,w,panel,curvature";

/// Floats use Rust's shortest round-trip formatting, so reading back is exact.
pub fn write_grid_csv(w: &mut impl Write, grid: &QuadratureGrid) -> Result<()> {
    writeln!(w, "{GRID_HEADER}")?;
    for i in 0..grid.len() {
        let (p, n) = (grid.points[i], grid.normals[i]);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            grid.nodes[i],
            p[0],
            p[1],
            n[0],
            n[1],
            grid.weights[i],
            grid.panel_of[i],
            grid.curvature[i]
        )?;
    }
    Ok(())
}

pub fn read_grid_csv(r: impl BufRead) -> Result<QuadratureGrid> {
    let err = |line: usize, msg: &str| fmt_err("grid CSV", format!("line {line}: {msg}"));
    let mut lines = r.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(GRID_HEADER) {
        return Err(err(1, "missing header"));
    }
    let mut g = QuadratureGrid {
        nodes: vec![],
        points: vec![],
        normals: vec![],
        weights: vec![],
        curvature: vec![],
        panel_of: vec![],
        nodes_per_panel: 0,
    };
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 8 {
            return Err(err(k + 2, "expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(k + 2, "bad number"));
        g.nodes.push(num(f[0])?);
        g.points.push([num(f[1])?, num(f[2])?]);
        g.normals.push([num(f[3])?, num(f[4])?]);
        g.weights.push(num(f[5])?);
        g.panel_of
            .push(f[6].parse().map_err(|_| err(k + 2, "bad panel index"))?);
        g.curvature.push(num(f[7])?);
    }
    if g.is_empty() {
        return Err(fmt_err("grid CSV", "no nodes"));
    }
    let mut counts = vec![0usize; g.panel_count()];
    for (i, &p) in g.panel_of.iter().enumerate() {
        if i > 0 && p != g.panel_of[i - 1] && p != g.panel_of[i - 1] + 1 {
            return Err(fmt_err("grid CSV", "panels are not contiguous"));
        }
        counts[p] += 1;
    }
    if g.panel_of[0] != 0 || counts.iter().any(|&c| c != counts[0]) {
        return Err(fmt_err("grid CSV", "panels must hold equal node counts"));
    }
    g.nodes_per_panel = counts[0];
    Ok(g)
}

/// Reads a vector: one value per line, or the last field of comma
/// separated lines. Blank lines, `#` comments and a non-numeric first line
/// are skipped.
pub fn read_vector(r: impl BufRead) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let field = t.rsplit(',').next().unwrap_or(t).trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => {}
            Err(_) => {
                return Err(fmt_err(
                    "vector",
                    format!("line {}: bad number {field:?}", k + 1),
                ))
            }
        }
    }
    Ok(out)
}

pub fn write_vector_csv(w: &mut impl Write, name: &str, v: &[f64]) -> Result<()> {
    writeln!(w, "index,{name}")?;
    for (i, x) in v.iter().enumerate() {
        writeln!(w, "{i},{x}")?;
    }
    Ok(())
}
