//! Building a map through the chat-completion backend, answered from a
//! recorded transcript so no network access or credentials are needed.
//!
//! Run with `cargo run --example llm_replay`. Set `OPENAI_API_KEY` and pass
//! `--live` to send the same requests to the service instead.

use std::path::Path;

use topotext::canonical::NodeName;
use topotext::instruction::{extract_canonical, RetryBudget};
use topotext::llm::{ImplicitMode, LlmClient, LlmConfig, PromptSet, ReplayTransport, DEFAULT_BASE_URL, DEFAULT_MODEL};
use topotext::router::{find_route, RouteQuery};
use topotext::topo_map::TopoMap;

fn main() {
    let transcript = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy_transcript.json");
    let client = if std::env::args().any(|a| a == "--live") {
        LlmClient::http(&LlmConfig::from_env().unwrap(), PromptSet::default()).unwrap()
    } else {
        let config = LlmConfig::new(DEFAULT_BASE_URL, DEFAULT_MODEL, "").unwrap();
        LlmClient::new(&config, PromptSet::default(), Box::new(ReplayTransport::from_file(&transcript).unwrap()))
    };

    let instructions = [
        "Depart from n1 to n2. Then, turn right and proceed to n3.",
        "Depart from n1 to n2. Then, proceed to n4. Then, turn left and proceed to n5.",
        "Depart from n5 to n4. Then, turn right and proceed to n2. Then, turn left and proceed to n3.",
    ];
    let mut map = TopoMap::new();
    for text in instructions {
        let (path, record) = extract_canonical(text, &client, RetryBudget::default()).unwrap();
        println!("{path}  ({} attempt(s))", record.attempts);
        map.add_path(&path).unwrap();
    }
    let name = |s: &str| NodeName::new(s).unwrap();
    let route = find_route(&map, &RouteQuery::new(name("n3"), name("n5")).unwrap()).unwrap();
    println!("\nn3 to n5 on the map: {route}");

    let reverse = client.llm_implicit_query(ImplicitMode::Reverse, &[instructions[0].to_string()], None).unwrap();
    println!("\nmodel, asked directly for the reverse of the first path:\n  {reverse}");
}
