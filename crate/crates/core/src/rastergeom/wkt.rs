//! Minimal WKT reader/writer for the single `POLYGON` form carried by labels.

use std::fmt::Write as _;

use crate::error::RasterError;

use super::Footprint;

type Ring = Vec<(f64, f64)>;

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), RasterError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(got) => Err(malformed(format!("expected {c:?} at byte {}, found {got:?}", self.pos))),
            None => Err(malformed(format!("expected {c:?}, found end of input"))),
        }
    }

    fn number(&mut self) -> Result<f64, RasterError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')')
            .unwrap_or(rest.len());
        let tok = &rest[..len];
        if tok.is_empty() {
            return Err(malformed(format!("expected a coordinate at byte {}", self.pos)));
        }
        let v: f64 = tok
            .parse()
            .map_err(|_| malformed(format!("non-numeric coordinate {tok:?}")))?;
        if !v.is_finite() {
            return Err(malformed(format!("non-finite coordinate {tok:?}")));
        }
        self.pos += len;
        Ok(v)
    }

    fn ring(&mut self) -> Result<Ring, RasterError> {
        self.expect('(')?;
        let mut ring = Vec::new();
        loop {
            let x = self.number()?;
            let y = self.number()?;
            ring.push((x, y));
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(ring);
                }
                Some(c) => return Err(malformed(format!("unexpected {c:?} inside ring"))),
                None => return Err(malformed("unbalanced parentheses".into())),
            }
        }
    }
}

fn malformed(msg: String) -> RasterError {
    RasterError::MalformedWkt(msg)
}

fn distinct_vertices(ring: &[(f64, f64)]) -> usize {
    let mut seen: Vec<(f64, f64)> = Vec::with_capacity(ring.len());
    for &p in ring {
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    seen.len()
}

/// Parses `POLYGON ((x y, ...), (x y, ...))`. Rings that are not explicitly
/// closed get their first vertex appended; coordinates are kept bit-exact.
pub fn parse_wkt(building_id: impl Into<String>, text: &str) -> Result<Footprint, RasterError> {
    let mut cur = Cursor { src: text, pos: 0 };
    cur.skip_ws();
    let kw_len = cur.src[cur.pos..]
        .find(|c: char| !c.is_ascii_alphabetic())
        .unwrap_or(cur.src.len() - cur.pos);
    let keyword = &cur.src[cur.pos..cur.pos + kw_len];
    if !keyword.eq_ignore_ascii_case("POLYGON") {
        return Err(malformed(format!("expected POLYGON, found {keyword:?}")));
    }
    cur.pos += kw_len;

    cur.expect('(')?;
    let mut rings = Vec::new();
    loop {
        let mut ring = cur.ring()?;
        if distinct_vertices(&ring) < 3 {
            return Err(malformed(format!(
                "ring {} has fewer than 3 distinct vertices",
                rings.len()
            )));
        }
        if ring.first() != ring.last() {
            ring.push(ring[0]);
        }
        rings.push(ring);
        match cur.peek() {
            Some(',') => cur.pos += 1,
            Some(')') => {
                cur.pos += 1;
                break;
            }
            Some(c) => return Err(malformed(format!("unexpected {c:?} between rings"))),
            None => return Err(malformed("unbalanced parentheses".into())),
        }
    }
    if cur.peek().is_some() {
        return Err(malformed(format!("trailing input at byte {}", cur.pos)));
    }
    Ok(Footprint {
        building_id: building_id.into(),
        rings,
    })
}

/// Writes the footprint back as WKT using shortest round-trip float formatting.
pub fn to_wkt(fp: &Footprint) -> String {
    let mut out = String::from("POLYGON (");
    for (i, ring) in fp.rings.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('(');
        for (j, (x, y)) in ring.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{x} {y}");
        }
        out.push(')');
    }
    out.push(')');
    out
}
