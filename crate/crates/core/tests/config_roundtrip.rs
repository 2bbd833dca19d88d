use proptest::prelude::*;

use fracflow::config::{BoundaryRule, ConditionKind, ConditionSpec, ScenarioConfig, Side, SubdomainSelector};

const BASE: &str = r#"
[geometry]
ambient_dim = 2
extent_m = [2.0, 1.0]
cells = [4, 2]

[[boundary]]
side = "all"
mass = { kind = "neumann", value = 0.0 }
energy = { kind = "neumann", value = 0.0 }

[solver]
dt_s = 10.0
t_end_s = 100.0
"#;

fn rule() -> impl Strategy<Value = BoundaryRule> {
    let sides = prop_oneof![Just(Side::XMin), Just(Side::XMax), Just(Side::YMin), Just(Side::YMax), Just(Side::All)];
    let sel = prop_oneof![Just(SubdomainSelector::Matrix), Just(SubdomainSelector::Fractures), Just(SubdomainSelector::All)];
    let cond = (any::<bool>(), -1e6f64..1e6, proptest::collection::vec(-1e3f64..1e3, 0..3)).prop_map(|(d, v, s)| {
        ConditionSpec {
            kind: if d { ConditionKind::Dirichlet } else { ConditionKind::Neumann },
            value: v,
            steps: s.iter().enumerate().map(|(i, x)| [10.0 * (i + 1) as f64, *x]).collect(),
        }
    });
    (sel, sides, cond.clone(), proptest::option::of(cond))
        .prop_map(|(subdomains, side, mass, energy)| BoundaryRule { subdomains, side, mass: Some(mass), energy })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialized_config_parses_back_identically(
        rules in proptest::collection::vec(rule(), 0..4),
        energy in any::<bool>(),
        porosity in 0.01f64..0.9,
        every in 1usize..10,
        p0 in proptest::option::of(1e4f64..1e7),
    ) {
        let mut cfg = ScenarioConfig::parse(BASE).unwrap();
        cfg.boundary.extend(rules);
        cfg.energy = energy;
        cfg.materials.solid.porosity = porosity;
        cfg.output.every_n_steps = every;
        cfg.initial.pressure_pa = p0;
        let text = cfg.to_toml();
        let back = ScenarioConfig::parse(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
