//! Invariant suite behind `--check`: structural identities evaluated on the
//! configured model without emitting data files.

use chiller_core::nalgebra::{DMatrix, DVector};

use chiller_core::lindblad::{build_liouvillian, Liouvillian};
use chiller_core::models::{Bath, BathSpec, ModelKind, PerBath, SystemModel};
use chiller_core::stages;
use chiller_core::thermo;

use crate::output::CheckLine;

fn line(name: &str, pass: bool, detail: String) -> CheckLine {
    CheckLine {
        name: name.to_string(),
        pass,
        detail,
    }
}

pub fn run_checks(model: &SystemModel<f64>, baths: &PerBath<BathSpec<f64>>) -> Vec<CheckLine> {
    let mut out = Vec::new();

    let eig = model.eigensystem();
    let h_rebuilt = eig.reconstruct();
    let scale = model.hamiltonian.norm().max(1e-300);
    let dev = (&h_rebuilt - &model.hamiltonian).norm() / scale;
    out.push(line(
        "eigensystem_reconstruction",
        dev <= 1e-12,
        format!("relative deviation {dev:.2e}"),
    ));

    let liouv = match build_liouvillian(model, baths) {
        Ok(l) => l,
        Err(e) => {
            out.push(line("liouvillian_assembly", false, e.to_string()));
            return out;
        }
    };

    out.push(detailed_balance(&liouv));
    out.push(eigenoperator_property(&liouv, &eig.energies));
    out.push(per_bath_gibbs_fixed_point(&liouv));

    match thermo::solve_with(model, &liouv) {
        Ok(report) => {
            let qmax = report
                .currents
                .iter()
                .map(|(_, q)| q.abs())
                .fold(0.0_f64, f64::max);
            let sum = report.currents.work + report.currents.hot + report.currents.cold;
            let floor = 1e-13
                * liouv
                    .channel_table()
                    .iter()
                    .fold(0.0_f64, |a, r| a.max(r.2))
                * (liouv.energies[liouv.dim - 1] - liouv.energies[0]);
            out.push(line(
                "current_conservation",
                sum.abs() <= (1e-10 * qmax).max(floor),
                format!("sum {sum:.2e}, scale {qmax:.2e}"),
            ));
            out.push(line(
                "entropy_nonnegative",
                report.entropy_rate >= -1e-12,
                format!("dS = {:.3e}", report.entropy_rate),
            ));
            out.push(line(
                "steady_state_residual",
                report.residual <= 1e-10,
                format!("residual {:.2e}", report.residual),
            ));

            if model.kind == ModelKind::FourLevel {
                out.push(breakdown_identity(model, baths, &report.currents));
            }
        }
        Err(e) => out.push(line("steady_state", false, e.to_string())),
    }

    out
}

fn detailed_balance(liouv: &Liouvillian<f64>) -> CheckLine {
    let mut worst: f64 = 0.0;
    for (bath, chans) in liouv.channels.iter() {
        let t = liouv.baths.get(bath).temperature;
        for ch in chans {
            if ch.rate_down > 0.0 {
                let expect = (-ch.omega / t).exp();
                worst = worst.max((ch.rate_up / ch.rate_down - expect).abs() / expect);
            }
        }
    }
    line(
        "detailed_balance",
        worst <= 1e-12,
        format!("worst relative deviation {worst:.2e}"),
    )
}

fn eigenoperator_property(liouv: &Liouvillian<f64>, energies: &DVector<f64>) -> CheckLine {
    let h = DMatrix::from_diagonal(energies);
    let mut worst: f64 = 0.0;
    for (_, chans) in liouv.channels.iter() {
        for ch in chans {
            let comm = &h * &ch.lowering - &ch.lowering * &h;
            worst = worst.max((comm + &ch.lowering * ch.omega).norm());
        }
    }
    line(
        "eigenoperator_commutator",
        worst <= 1e-10,
        format!("worst norm {worst:.2e}"),
    )
}

fn per_bath_gibbs_fixed_point(liouv: &Liouvillian<f64>) -> CheckLine {
    let mut worst: f64 = 0.0;
    for bath in Bath::ALL {
        let gibbs = liouv.gibbs(liouv.baths.get(bath).temperature);
        worst = worst.max(liouv.apply_dissipator(bath, &gibbs).norm());
    }
    line(
        "per_bath_gibbs_fixed_point",
        worst <= 1e-10,
        format!("worst dissipator norm {worst:.2e}"),
    )
}

fn breakdown_identity(
    model: &SystemModel<f64>,
    baths: &PerBath<BathSpec<f64>>,
    currents: &PerBath<f64>,
) -> CheckLine {
    match stages::stage_breakdown(model, baths) {
        Ok(bd) => {
            let total = bd.total();
            let qmax = currents
                .iter()
                .map(|(_, q)| q.abs())
                .fold(0.0_f64, f64::max)
                .max(1e-300);
            let mut worst: f64 = 0.0;
            for bath in Bath::ALL {
                worst = worst.max((currents.get(bath) - total.get(bath)).abs());
            }
            line(
                "stage_sum_identity",
                worst <= 1e-10 * qmax,
                format!("worst mismatch {worst:.2e}, scale {qmax:.2e}"),
            )
        }
        Err(e) => line("stage_sum_identity", false, e.to_string()),
    }
}
