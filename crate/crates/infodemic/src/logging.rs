use std::io::Write;

use env_logger::{Builder, Env};

/// Install the process logger. `RUST_LOG` picks the level (default `info`).
/// With `json`, each record is one JSON object per line on stderr.
pub fn init(json: bool) {
    let mut builder = Builder::from_env(Env::default().default_filter_or("info"));
    if json {
        builder.format(|buf, record| {
            let line = serde_json::json!({
                "ts": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                "level": record.level().as_str(),
                "target": record.target(),
                "msg": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    let _ = builder.try_init();
}
