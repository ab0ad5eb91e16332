use std::fmt;

use super::HbsMatrix;
use crate::quadrature::DenseMatrix;
use crate::tree::ROOT;

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub node: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}: {}", self.node, self.message)
    }
}

impl HbsMatrix {
    /// Checks shapes across levels, finiteness, and (when flagged) the
    /// identity rows of interpolatory bases. An empty report means well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let tree = self.tree();
        let mut push = |node: usize, message: String| out.push(Violation { node, message });
        let check = |push: &mut dyn FnMut(usize, String),
                     node: usize,
                     name: &str,
                     m: &DenseMatrix,
                     rows: usize,
                     cols: usize| {
            if m.shape() != (rows, cols) {
                push(
                    node,
                    format!(
                        "{name} is {}x{}, expected {rows}x{cols}",
                        m.nrows(),
                        m.ncols()
                    ),
                );
            }
            if m.iter().any(|v| !v.is_finite()) {
                push(node, format!("{name} has non-finite entries"));
            }
        };

        for tau in tree.nodes() {
            let node = self.node(tau);
            let (kr, kc) = (node.row_rank(), node.col_rank());
            if tree.is_leaf(tau) {
                let n = tree.range(tau).len();
                check(&mut push, tau, "D", &node.d, n, n);
                if tau == ROOT {
                    if kr != 0 || kc != 0 {
                        push(tau, "root must not carry basis matrices".into());
                    }
                    continue;
                }
                check(&mut push, tau, "U", &node.u, n, kr);
                check(&mut push, tau, "V", &node.v, n, kc);
            } else {
                let (a, b) = (2 * tau, 2 * tau + 1);
                let (na, nb) = (self.node(a), self.node(b));
                if !node.d.is_empty() {
                    push(tau, "parent node carries a diagonal block".into());
                }
                check(
                    &mut push,
                    tau,
                    "B12",
                    &node.b12,
                    na.row_rank(),
                    nb.col_rank(),
                );
                check(
                    &mut push,
                    tau,
                    "B21",
                    &node.b21,
                    nb.row_rank(),
                    na.col_rank(),
                );
                if tau == ROOT {
                    if kr != 0 || kc != 0 {
                        push(tau, "root must not carry basis matrices".into());
                    }
                    continue;
                }
                let rows = na.row_rank() + nb.row_rank();
                let cols = na.col_rank() + nb.col_rank();
                check(&mut push, tau, "U", &node.u, rows, kr);
                check(&mut push, tau, "V", &node.v, cols, kc);
            }
            if self.is_interpolatory() {
                for (name, basis, skel) in [
                    ("U", &node.u, &node.row_skeleton),
                    ("V", &node.v, &node.col_skeleton),
                ] {
                    if skel.len() != basis.ncols() || skel.iter().any(|&j| j >= basis.nrows()) {
                        push(tau, format!("{name} skeleton does not match its rank"));
                        continue;
                    }
                    let sub = basis.select_rows(skel);
                    if sub != DenseMatrix::identity(skel.len(), skel.len()) {
                        push(tau, format!("{name}(J,:) is not the identity"));
                    }
                }
            }
        }
        out
    }
}
