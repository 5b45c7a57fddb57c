use std::io::Write;

use super::DiagnosticsRecord;

/// Column order of `diagnostics.csv`.
pub const CSV_HEADER: [&str; 12] = [
    "t",
    "psi_integral",
    "grad_phi_energy",
    "sigma_l2",
    "mu_h1",
    "sigma_h1",
    "energy_lhs",
    "energy_rhs_bound",
    "identity_residual",
    "star_norm_phi",
    "phi_l2",
    "inequality_lhs",
];

/// Writes a header line and one row per record. Floats use the shortest
/// round-trip representation, so output is reproducible bit for bit.
pub fn write_records<W: Write>(out: W, records: &[DiagnosticsRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let row = [
            r.t,
            r.psi_integral,
            r.grad_phi_energy,
            r.sigma_l2,
            r.mu_h1,
            r.sigma_h1,
            r.energy_lhs,
            r.energy_rhs_bound,
            r.identity_residual,
            r.star_norm_phi,
            r.phi_l2,
            r.inequality_lhs,
        ];
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[DiagnosticsRecord { t: 0.5, psi_integral: 1.25, ..Default::default() }]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert!(lines.next().unwrap().starts_with("0.5,1.25,0,"));
    }
}
