use cebap_core::angular::{build_grid, upa_dense, upa_sparse, Region};
use cebap_core::cebap::rho_n;
use cebap_core::channel::{Scenario, ScenarioFile, UserCount};
use cebap_core::montecarlo::{ergodic_utility, WeightsPolicy};
use cebap_core::precoding::UtilityKind;
use cebap_core::vmf::{vmf_aps, VmfParams};

const LAMBDA: f64 = 0.06;

fn vmf_scenario(nu0: f64) -> Scenario {
    let grid = build_grid(30, 48, LAMBDA).unwrap();
    let params = VmfParams::new([0.0, 0.5, 0.75f64.sqrt()], nu0, 1.0, grid.wavenumber()).unwrap();
    let aps = vmf_aps(&grid, &params).unwrap();
    Scenario::new(grid, vec![aps.values().to_vec()], vec![1.0], UserCount { k0: 6.0, max: 9 }, 1e-12, 1.0).unwrap()
}

#[test]
fn rho_ordering_carries_over_to_ergodic_sum_rate() {
    let scenario = vmf_scenario(0.3);
    let grid = scenario.grid();
    let aps = scenario.aps();
    let region = Region::square(3.0 * LAMBDA, LAMBDA / 2.0).unwrap();
    let a = upa_sparse(3, 3, region).unwrap();
    let b = upa_dense(3, 3, LAMBDA / 2.0, region).unwrap();
    let ra = rho_n(grid, &a, &aps, 100, 0.0).unwrap();
    let rb = rho_n(grid, &b, &aps, 100, 0.0).unwrap();
    assert!(10.0 * (ra / rb).log10() > 1.0, "{ra} vs {rb}");
    let ea = ergodic_utility(&scenario, &a, UtilityKind::WeightedSumRate, &WeightsPolicy::Unit, 5000, 3).unwrap();
    let eb = ergodic_utility(&scenario, &b, UtilityKind::WeightedSumRate, &WeightsPolicy::Unit, 5000, 3).unwrap();
    let margin = 3.0 * (ea.std_error.powi(2) + eb.std_error.powi(2)).sqrt();
    assert!(ea.mean - eb.mean > margin, "{} vs {} ± {margin}", ea.mean, eb.mean);
}

#[test]
fn scenario_file_round_trip_is_bit_exact() {
    let scenario = vmf_scenario(0.1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    scenario.save(&path).unwrap();
    let back = Scenario::load(&path).unwrap();
    for (x, y) in scenario.aps().values().iter().zip(back.aps().values()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    assert_eq!(ScenarioFile::from_scenario(&scenario), ScenarioFile::from_scenario(&back));
    assert_eq!(std::fs::read(&path).unwrap(), ScenarioFile::from_scenario(&back).to_json().unwrap().into_bytes());
}
