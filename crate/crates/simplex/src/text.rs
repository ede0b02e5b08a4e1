//! Line-oriented text dump of an LP, loosely modelled on MPS.
//!
//! ```text
//! LP <rows> <cols>
//! C <col> <cost>
//! A <row> <col> <value>
//! B <row> <rhs>
//! U <col> <upper>
//! END
//! ```
//!
//! Zero costs and right-hand sides are omitted. Values use Rust's
//! round-trip float formatting, so `parse(&dump(lp)) == lp` up to entry order.

use crate::{LpError, StandardFormLp};
use std::fmt::Write;

pub fn dump(lp: &StandardFormLp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "LP {} {}", lp.rows, lp.cols);
    for (j, c) in lp.c.iter().enumerate() {
        if *c != 0.0 {
            let _ = writeln!(out, "C {j} {c:?}");
        }
    }
    let mut entries = lp.entries.clone();
    entries.sort_by_key(|&(r, c, _)| (c, r));
    for (r, c, v) in entries {
        let _ = writeln!(out, "A {r} {c} {v:?}");
    }
    for (i, b) in lp.b.iter().enumerate() {
        if *b != 0.0 {
            let _ = writeln!(out, "B {i} {b:?}");
        }
    }
    if let Some(u) = &lp.upper {
        for (j, u) in u.iter().enumerate() {
            if u.is_finite() {
                let _ = writeln!(out, "U {j} {u:?}");
            }
        }
    }
    out.push_str("END\n");
    out
}

pub fn parse(text: &str) -> Result<StandardFormLp, LpError> {
    let bad = |line: &str| LpError::Malformed(format!("cannot parse line `{line}`"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| LpError::Malformed("empty dump".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != "LP" {
        return Err(bad(header));
    }
    let rows: usize = h[1].parse().map_err(|_| bad(header))?;
    let cols: usize = h[2].parse().map_err(|_| bad(header))?;
    let mut lp = StandardFormLp::new(rows, cols);
    let mut upper: Option<Vec<f64>> = None;
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let idx = |k: usize| f.get(k).and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad(line));
        let val = |k: usize| f.get(k).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(line));
        match f.first().copied() {
            Some("C") => *lp.c.get_mut(idx(1)?).ok_or_else(|| bad(line))? = val(2)?,
            Some("A") => lp.entries.push((idx(1)?, idx(2)?, val(3)?)),
            Some("B") => *lp.b.get_mut(idx(1)?).ok_or_else(|| bad(line))? = val(2)?,
            Some("U") => {
                let u = upper.get_or_insert_with(|| vec![f64::INFINITY; cols]);
                *u.get_mut(idx(1)?).ok_or_else(|| bad(line))? = val(2)?;
            }
            Some("END") => break,
            _ => return Err(bad(line)),
        }
    }
    lp.upper = upper;
    lp.validate()?;
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut lp = StandardFormLp::new(2, 3);
        lp.push(0, 0, 1.0);
        lp.push(1, 2, -0.1);
        lp.push(0, 1, 1.0 / 3.0);
        lp.b = vec![1.0, -2.5];
        lp.c = vec![0.0, 3.0, 1e-17];
        lp.upper = Some(vec![f64::INFINITY, 4.0, f64::INFINITY]);
        let back = parse(&dump(&lp)).unwrap();
        assert_eq!(back.rows, 2);
        assert_eq!(back.c, lp.c);
        assert_eq!(back.b, lp.b);
        assert_eq!(back.upper, lp.upper);
        let mut a = lp.entries.clone();
        let mut b = back.entries.clone();
        a.sort_by_key(|x| (x.0, x.1));
        b.sort_by_key(|x| (x.0, x.1));
        assert_eq!(a, b);
    }
}
