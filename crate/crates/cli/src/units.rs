//! SI unit annotations for JSON reports.

use serde_json::{Map, Value};

/// Unit of a report field, guessed from its name.
fn unit_of(key: &str) -> Option<&'static str> {
    let unit = match key {
        "vin" | "v_o_target" | "v_ppc" | "v_s" | "v_d1" | "v_d2" | "v_d3" => "V",
        "rl" => "ohm",
        "p_o" => "W",
        "fs" => "Hz",
        "l1" | "lm" | "lk" | "lm_min" => "H",
        "c1" | "c2" | "c3" | "c4" | "c1_min" | "c2_min" | "c3_min" | "c4_min" => "F",
        k if k.starts_with("i_") => "A",
        k if k.starts_with("v_c") || k == "v_o" => "V",
        _ => return None,
    };
    Some(unit)
}

/// Adds a `<key>_unit` entry next to every numeric field with a known unit,
/// recursively.
pub fn annotate(v: &mut Value) {
    match v {
        Value::Object(map) => {
            let mut units = Map::new();
            for (key, val) in map.iter_mut() {
                annotate(val);
                if val.is_number() || val.is_null() {
                    if let Some(u) = unit_of(key) {
                        units.insert(format!("{key}_unit"), Value::from(u));
                    }
                }
            }
            map.extend(units);
        }
        Value::Array(items) => items.iter_mut().for_each(annotate),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_fields_get_units() {
        let mut v = json!({"lm": 1e-4, "duty": 0.6, "sizing": [{"c1": 1e-6, "i_o": 1.0}]});
        annotate(&mut v);
        assert_eq!(v["lm_unit"], "H");
        assert!(v.get("duty_unit").is_none());
        assert_eq!(v["sizing"][0]["c1_unit"], "F");
        assert_eq!(v["sizing"][0]["i_o_unit"], "A");
    }
}
