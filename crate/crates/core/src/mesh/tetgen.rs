//! TetGen ASCII `.node` / `.ele` reader.

use super::Mesh;
use crate::error::{Error, Result};

/// Non-empty, comment-stripped lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn parse<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse {what} from {s:?}") })
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, Vec<&'a str>)>, file: &str, min_fields: usize) -> Result<(usize, Vec<usize>)> {
    let (line, f) = lines
        .next()
        .ok_or(Error::Parse { line: 0, message: format!("{file} file has no header") })?;
    if f.len() < min_fields {
        return Err(Error::Parse { line, message: format!("{file} header needs {min_fields} fields") });
    }
    let vals = f.iter().map(|s| parse::<usize>(s, line, "header field")).collect::<Result<Vec<_>>>()?;
    Ok((line, vals))
}

/// Parses a `.node`/`.ele` pair. Indexing base (0 or 1) is taken from the
/// first node's number; element indices are interpreted in the same base.
pub fn read_tetgen(node_text: &str, ele_text: &str) -> Result<Mesh> {
    let mut nodes = data_lines(node_text);
    let (hline, h) = header(&mut nodes, "node", 1)?;
    let count = h[0];
    let dim = h.get(1).copied().unwrap_or(3);
    if dim != 3 {
        return Err(Error::Parse { line: hline, message: format!("expected dimension 3, got {dim}") });
    }
    let mut base = None;
    let mut vertices = Vec::with_capacity(count);
    for (line, f) in nodes.by_ref().take(count) {
        if f.len() < 4 {
            return Err(Error::Parse { line, message: "node line needs an index and 3 coordinates".into() });
        }
        let idx: usize = parse(f[0], line, "node index")?;
        let b = *base.get_or_insert(idx);
        if b > 1 {
            return Err(Error::Parse { line, message: format!("first node index must be 0 or 1, got {idx}") });
        }
        if idx != vertices.len() + b {
            return Err(Error::Parse { line, message: format!("node index {idx} out of sequence") });
        }
        vertices.push([parse(f[1], line, "x")?, parse(f[2], line, "y")?, parse(f[3], line, "z")?]);
    }
    if vertices.len() != count {
        return Err(Error::Parse { line: hline, message: format!("header declares {count} nodes, found {}", vertices.len()) });
    }
    let base = base.unwrap_or(0);

    let mut eles = data_lines(ele_text);
    let (eline, h) = header(&mut eles, "ele", 2)?;
    let (ntet, per) = (h[0], h[1]);
    if per != 4 {
        return Err(Error::Parse { line: eline, message: format!("only 4-node tetrahedra are supported, got {per} nodes per element") });
    }
    let mut elements = Vec::with_capacity(ntet);
    for (line, f) in eles.by_ref().take(ntet) {
        if f.len() < 5 {
            return Err(Error::Parse { line, message: "element line needs an index and 4 vertices".into() });
        }
        let mut e = [0usize; 4];
        for i in 0..4 {
            let v: usize = parse(f[i + 1], line, "vertex index")?;
            if v < base {
                return Err(Error::VertexOutOfRange { element: elements.len(), vertex: v, count });
            }
            e[i] = v - base;
        }
        elements.push(e);
    }
    if elements.len() != ntet {
        return Err(Error::Parse { line: eline, message: format!("header declares {ntet} elements, found {}", elements.len()) });
    }
    Mesh::new(vertices, elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NODE1: &str = "# unit tet\n4 3 0 0\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n";
    const ELE1: &str = "1 4 0\n1 1 2 3 4\n";
    const NODE0: &str = "4 3 0 0\n0 0 0 0\n1 1 0 0\n2 0 1 0\n3 0 0 1 # last\n";
    const ELE0: &str = "1 4 0\n0 0 1 2 3\n";

    #[test]
    fn minimal_pair() {
        let m = read_tetgen(NODE1, ELE1).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.vertices.len(), 4);
    }

    #[test]
    fn zero_and_one_based_agree() {
        let a = read_tetgen(NODE1, ELE1).unwrap();
        let b = read_tetgen(NODE0, ELE0).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.elements, b.elements);
    }

    #[test]
    fn errors() {
        assert!(matches!(read_tetgen(NODE1, "1 4 0\n1 1 2 3 5\n"), Err(Error::VertexOutOfRange { .. })));
        assert!(matches!(read_tetgen(NODE1, "1 10 0\n1 1 2 3 4 5 6 7 8 9 10\n"), Err(Error::Parse { .. })));
        assert!(matches!(read_tetgen("four 3 0 0\n", ELE1), Err(Error::Parse { .. })));
        assert!(matches!(read_tetgen("", ELE1), Err(Error::Parse { .. })));
    }
}
