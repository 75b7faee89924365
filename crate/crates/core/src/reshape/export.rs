//! CPLEX LP text export of the grouped encoding, readable by common MILP solvers.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::MilpInstance;

fn var(g: usize) -> String {
    format!("x_g{g}")
}

fn term(first: bool, c: f64, name: &str) -> String {
    match (first, c < 0.0) {
        (true, false) => format!("{c} {name}"),
        (true, true) => format!("- {} {name}", -c),
        (false, false) => format!(" + {c} {name}"),
        (false, true) => format!(" - {} {name}", -c),
    }
}

/// Writes the model. Rows of an instance without variables are constant and are
/// emitted as comments.
pub fn write_lp<W: Write>(inst: &MilpInstance, mut out: W) -> std::io::Result<()> {
    let groups = inst.groups();
    writeln!(out, "\\ layer {} neurons {:?} eps {}", inst.layer(), inst.neurons(), inst.eps())?;
    for (g, group) in groups.iter().enumerate() {
        writeln!(out, "\\ {} signature {:?} members {}", var(g), group.signature.0, group.capacity())?;
    }
    writeln!(out, "Minimize")?;
    let obj: String = (0..groups.len()).map(|g| term(g == 0, 1.0, &var(g))).collect();
    writeln!(out, " obj: {obj}")?;
    writeln!(out, "Subject To")?;
    for row in inst.rows() {
        if groups.is_empty() {
            writeln!(out, "\\ {}: 0 <= {}", row.kind.name(), row.rhs)?;
            continue;
        }
        let lhs: String = row.coeffs.iter().enumerate().map(|(g, c)| term(g == 0, *c, &var(g))).collect();
        writeln!(out, " {}: {lhs} <= {}", row.kind.name(), row.rhs)?;
    }
    writeln!(out, "Bounds")?;
    for (g, group) in groups.iter().enumerate() {
        writeln!(out, " 0 <= {} <= {}", var(g), group.capacity())?;
    }
    if !groups.is_empty() {
        writeln!(out, "Generals")?;
        let names: Vec<String> = (0..groups.len()).map(var).collect();
        writeln!(out, " {}", names.join(" "))?;
    }
    writeln!(out, "End")
}

pub fn export_lp(inst: &MilpInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_lp(inst, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reshape::tests::problem;

    fn text(inst: &MilpInstance) -> String {
        let mut buf = Vec::new();
        write_lp(inst, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn sections_and_rows() {
        let p = problem(vec![vec![1, 3]], vec![vec![0], vec![1], vec![0]], vec![0, 1, 2], 0.1);
        let inst = MilpInstance::from_problem(&p).unwrap();
        let s = text(&inst);
        for section in ["Minimize", "Subject To", "Bounds", "Generals", "End"] {
            assert!(s.lines().any(|l| l == section), "{section}");
        }
        assert!(s.contains(" obj: 1 x_g0 + 1 x_g1\n"));
        assert!(s.contains(" 0 <= x_g0 <= 2\n"));
        // r = 0.25 for bin 0: hi coefficients 1 - 0.25 + 0.1 and -0.25 + 0.1
        assert!(s.contains(" hi_n0_b0: 0.85 x_g0 - 0.15 x_g1 <= "), "{s}");
        assert_eq!(s.lines().filter(|l| l.contains("_n0_b")).count(), 4);
        assert!(s.contains(" survivors: 1 x_g0 + 1 x_g1 <= 2\n"));
    }

    #[test]
    fn no_variables_gives_comment_rows() {
        let p = problem(vec![vec![1, 1]], vec![vec![0], vec![1]], vec![], 0.1);
        let s = text(&MilpInstance::from_problem(&p).unwrap());
        assert!(s.contains("\\ hi_n0_b0: 0 <= "));
        assert!(!s.contains("Generals"));
        assert!(s.trim_end().ends_with("End"));
    }
}
