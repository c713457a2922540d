//! Test backend: answers every request with fixed logits.
//!
//! `predism-stub-backend --logits 1,2,3,4,5 [--delay-ms N] [--garbage]`

use std::io::{BufRead, Write};

use clap::Parser;
use serde_json::{json, Value};

#[derive(Parser)]
struct Args {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    logits: Vec<f64>,
    /// Sleep before each reply.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Reply with a line that is not valid JSON.
    #[arg(long)]
    garbage: bool,
}

fn main() {
    let args = Args::parse();
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let req: Value = serde_json::from_str(&line).unwrap_or(Value::Null);
        if args.delay_ms > 0 {
            std::thread::sleep(std::time::Duration::from_millis(args.delay_ms));
        }
        let reply = if args.garbage {
            "not json".to_string()
        } else {
            json!({ "request_id": req["request_id"], "logits": args.logits }).to_string()
        };
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
}
