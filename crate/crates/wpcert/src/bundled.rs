//! Configurations shipped inside the binary, selected with
//! `--config bundled:NAME`.

/// `(name, text)` of every bundled configuration.
pub const BUNDLED: &[(&str, &str)] = &[
    ("mdep_m1_p1", include_str!("../configs/mdep_m1_p1.conf")),
    ("ustat_sum_p2", include_str!("../configs/ustat_sum_p2.conf")),
];

/// Prefix that selects a bundled configuration.
pub const PREFIX: &str = "bundled:";

/// The text of the bundled configuration `name`.
pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Names of the bundled configurations.
pub fn names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::known_keys;
    use crate::RunConfig;

    #[test]
    fn bundled_configs_parse_and_use_known_keys() {
        let keys = known_keys();
        for (name, text) in BUNDLED {
            let cfg = RunConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.check_allowed(&keys).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(get("mdep_m1_p1").is_some());
        assert!(get("nope").is_none());
    }
}
