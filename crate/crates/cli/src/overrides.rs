//! `--set key=value` overrides applied to JSON-serializable configs.

use decof_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Applies `a.b.c=value` overrides whose first segment is `section`
/// (or every override when `section` is empty). Values are parsed as JSON,
/// falling back to a plain string. Unknown keys are rejected.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(config: &T, section: &str, sets: &[String]) -> Result<T> {
    let mut value = serde_json::to_value(config)?;
    for set in sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{set}' is not key=value")))?;
        let path: Vec<&str> = key.trim().split('.').collect();
        let path = match (section.is_empty(), path.split_first()) {
            (true, _) => &path[..],
            (false, Some((head, rest))) if *head == section => rest,
            _ => continue,
        };
        let mut slot = &mut value;
        for part in path {
            slot = slot
                .get_mut(*part)
                .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        }
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("after overrides: {e}")))
}

/// Rejects overrides whose first segment is none of `sections`.
pub fn check_sections(sets: &[String], sections: &[&str]) -> Result<()> {
    for set in sets {
        let key = set.split('=').next().unwrap_or_default();
        let head = key.split('.').next().unwrap_or_default();
        if !sections.contains(&head) {
            return Err(Error::Config(format!(
                "override '{set}' must start with one of: {}",
                sections.join(", ")
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use decof_core::verifier::TrainConfig;

    #[test]
    fn sets_nested_values() {
        let sets = vec!["train.lr=0.05".to_string(), "train.max_epochs=3".into(), "verifier.width=8".into()];
        let t = apply_overrides(&TrainConfig::default(), "train", &sets).unwrap();
        assert_eq!(t.lr, 0.05);
        assert_eq!(t.max_epochs, 3);
        let bad = apply_overrides(&TrainConfig::default(), "train", &["train.lrr=1".to_string()]);
        assert!(matches!(bad, Err(Error::Config(_))));
        let typed = apply_overrides(&TrainConfig::default(), "train", &["train.lr=fast".to_string()]);
        assert!(matches!(typed, Err(Error::Config(_))));
        assert!(check_sections(&sets, &["train", "verifier"]).is_ok());
        assert!(check_sections(&sets, &["train"]).is_err());
    }
}
