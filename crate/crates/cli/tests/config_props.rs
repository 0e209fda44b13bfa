use proptest::prelude::*;
use urtlab_cli::config::{command_params, ExperimentConfig, COMMANDS};

fn value() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<u32>().prop_map(|v| v.to_string()),
        any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(|v| format!("{v:?}")),
        "[a-z][a-z0-9:=,._/-]{0,20}",
    ]
}

proptest! {
    #[test]
    fn text_form_round_trips(
        idx in 0usize..COMMANDS.len(),
        seed in any::<u64>(),
        picks in prop::collection::vec((any::<prop::sample::Index>(), value()), 0..6),
        csv in any::<bool>(),
    ) {
        let command = COMMANDS[idx];
        let mut c = ExperimentConfig::new(command).unwrap();
        c.set("seed", &seed.to_string()).unwrap();
        c.set("format", if csv { "csv" } else { "json" }).unwrap();
        let params = command_params(command).unwrap();
        for (i, v) in picks {
            c.set(params[i.index(params.len())].key, &v).unwrap();
        }
        let back = ExperimentConfig::parse(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }
}
