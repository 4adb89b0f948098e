use std::io::{self, Write};

use crate::Trajectory;

/// `t,tau,x1..xn,z1..znz,u,u1,u2,r,theta_hat,theta1_hat,V,Vbar,alpha`.
pub fn csv_header(n: usize, n_z: usize) -> String {
    let mut cols = vec!["t".to_string(), "tau".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n_z).map(|i| format!("z{i}")));
    for c in ["u", "u1", "u2", "r", "theta_hat", "theta1_hat", "V", "Vbar", "alpha"] {
        cols.push(c.to_string());
    }
    cols.join(",")
}

/// Writes one row per recorded sample, every value with 17 significant digits.
pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", csv_header(traj.n, traj.n_z))?;
    let mut row = Vec::with_capacity(traj.n + traj.n_z + 11);
    for s in &traj.samples {
        row.clear();
        row.push(s.t);
        row.push(s.tau);
        row.extend_from_slice(&s.x);
        row.extend_from_slice(&s.z);
        row.extend_from_slice(&[s.u, s.u1, s.u2, s.r, s.theta_hat, s.theta1_hat, s.v, s.v_bar, s.alpha]);
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}
