use std::io::Write;

use nalgebra::Vector6;

use crate::spatial::{Pose, Vec3};

/// One tick of a simulation record. Wrenches are world-frame `[force; moment]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub pose: Pose,
    pub euler_deg: [f64; 3],
    pub measured: Pose,
    pub measured_euler_deg: [f64; 3],
    pub u: Vector6<f64>,
    pub u_filt: Vector6<f64>,
    pub omega_sq: Vec<f64>,
    /// Filtered command `u_filt` minus the wrench the rotors deliver.
    pub residual: Vector6<f64>,
    /// Force and torque the platform exerts on link 1, true plant.
    pub f1: Vec3,
    pub tau1: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rotor_count: usize,
    pub rows: Vec<LogRow>,
}

const WRENCH_SUFFIXES: [&str; 6] = ["fx", "fy", "fz", "mx", "my", "mz"];

impl SimLog {
    pub fn new(rotor_count: usize) -> Self {
        Self { rotor_count, rows: Vec::new() }
    }

    /// Column names in output order.
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "Px", "Py", "Pz", "phi_deg", "psi_deg", "gamma_deg"].map(String::from).into();
        h.extend(["meas_Px", "meas_Py", "meas_Pz", "meas_phi_deg", "meas_psi_deg", "meas_gamma_deg"].map(String::from));
        h.extend(WRENCH_SUFFIXES.iter().map(|s| format!("u_{s}")));
        h.extend(WRENCH_SUFFIXES.iter().map(|s| format!("u_filt_{s}")));
        h.extend((1..=self.rotor_count).map(|i| format!("omega_sq_{i}")));
        h.extend(WRENCH_SUFFIXES.iter().map(|s| format!("resid_{s}")));
        h.extend(["f1_x", "f1_y", "f1_z", "tau1_x", "tau1_y", "tau1_z"].map(String::from));
        h
    }

    /// CSV with a header line. Numbers use the shortest exact round-trip form.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.header().join(","))?;
        let mut line = String::new();
        for r in &self.rows {
            line.clear();
            let vals = std::iter::once(r.t)
                .chain(r.pose.pos.iter().copied())
                .chain(r.euler_deg)
                .chain(r.measured.pos.iter().copied())
                .chain(r.measured_euler_deg)
                .chain(r.u.iter().copied())
                .chain(r.u_filt.iter().copied())
                .chain(r.omega_sq.iter().copied())
                .chain(r.residual.iter().copied())
                .chain(r.f1.iter().copied())
                .chain(r.tau1.iter().copied());
            for (k, v) in vals.enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}
