//! Reverse-path and leave-one-out combined-path evaluation over sampled
//! datasets, for the explicit map pipeline or a model answering directly.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::canonical::{CanonicalPath, NodeName};
use crate::envsim::PathDataset;
use crate::instruction::{parse_instruction, PathReader};
use crate::llm::{ImplicitMode, ImplicitModel};
use crate::router::{find_route, RouteQuery};
use crate::topo_map::{MapError, TopoMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Reverse,
    Combined,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Reverse => "reverse",
            Task::Combined => "combined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Explicit,
    Implicit,
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodKind::Explicit => "explicit",
            MethodKind::Implicit => "implicit",
        })
    }
}

/// What answers the questions.
pub enum Method<'a> {
    /// Read instructions into canonical paths, build a map, route on it.
    Explicit(&'a dyn PathReader),
    /// Ask a model directly and parse its free-text answer.
    Implicit { model: &'a dyn ImplicitModel, label: String },
}

impl Method<'_> {
    pub fn kind(&self) -> MethodKind {
        match self {
            Method::Explicit(_) => MethodKind::Explicit,
            Method::Implicit { .. } => MethodKind::Implicit,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Explicit(reader) => reader.label(),
            Method::Implicit { label, .. } => label.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// A correct route of minimal length.
    Shortest,
    /// A correct route, but longer than necessary.
    Reachable,
    ParseFailure,
    InsufficientInformation,
    Wrong,
}

impl Outcome {
    pub fn reachable(self) -> bool {
        matches!(self, Outcome::Shortest | Outcome::Reachable)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub dataset: String,
    pub index: usize,
    pub start: NodeName,
    pub goal: NodeName,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<CanonicalPath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// `attempted` is the sum of `succeeded_reachable` and the three failure
/// counts; `succeeded_shortest` counts a subset of the reachable successes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub attempted: usize,
    pub succeeded_reachable: usize,
    pub succeeded_shortest: usize,
    pub failed_parse: usize,
    pub failed_insufficient: usize,
    pub failed_wrong: usize,
}

impl Totals {
    fn count(&mut self, outcome: Outcome) {
        self.attempted += 1;
        match outcome {
            Outcome::Shortest => {
                self.succeeded_reachable += 1;
                self.succeeded_shortest += 1;
            }
            Outcome::Reachable => self.succeeded_reachable += 1,
            Outcome::ParseFailure => self.failed_parse += 1,
            Outcome::InsufficientInformation => self.failed_insufficient += 1,
            Outcome::Wrong => self.failed_wrong += 1,
        }
    }

    pub fn reachable_rate(&self) -> f64 {
        rate(self.succeeded_reachable, self.attempted)
    }

    pub fn shortest_rate(&self) -> f64 {
        rate(self.succeeded_shortest, self.attempted)
    }
}

fn rate(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub method: MethodKind,
    pub backend: String,
    pub totals: Totals,
    pub items: Vec<ItemRecord>,
}

impl EvalReport {
    fn new(task: Task, method: &Method<'_>) -> Self {
        EvalReport {
            task,
            method: method.kind(),
            backend: method.label(),
            totals: Totals::default(),
            items: Vec::new(),
        }
    }

    fn push(&mut self, record: ItemRecord) {
        self.totals.count(record.outcome);
        self.items.push(record);
    }

    /// Appends another report over the same task, method and backend.
    pub fn absorb(&mut self, other: EvalReport) {
        assert_eq!((self.task, self.method), (other.task, other.method), "mixing report kinds");
        for record in other.items {
            self.push(record);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

/// Renders reports as an aligned table, one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let header = [
        "task", "method", "backend", "attempted", "reachable", "shortest", "parse", "insufficient",
        "wrong", "reachable%", "shortest%",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let t = &r.totals;
            vec![
                r.task.to_string(),
                r.method.to_string(),
                r.backend.clone(),
                t.attempted.to_string(),
                t.succeeded_reachable.to_string(),
                t.succeeded_shortest.to_string(),
                t.failed_parse.to_string(),
                t.failed_insufficient.to_string(),
                t.failed_wrong.to_string(),
                format!("{:.1}", 100.0 * t.reachable_rate()),
                format!("{:.1}", 100.0 * t.shortest_rate()),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, s)| if c < 3 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec());
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in &rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn evaluate(datasets: &[PathDataset], task: Task, method: &Method<'_>) -> EvalReport {
    let mut report = EvalReport::new(task, method);
    for dataset in datasets {
        let part = match task {
            Task::Reverse => eval_reverse(dataset, method),
            Task::Combined => eval_combined(dataset, method),
        };
        report.absorb(part);
    }
    report
}

/// Asks for every item's path in the opposite direction. Only the exact
/// reversal of the item's path counts, and it is always shortest.
pub fn eval_reverse(dataset: &PathDataset, method: &Method<'_>) -> EvalReport {
    let mut report = EvalReport::new(Task::Reverse, method);
    let vocabulary: Vec<NodeName> = dataset.environment.nodes().map(|(n, _)| n.clone()).collect();
    for (index, item) in dataset.items.iter().enumerate() {
        let mut record = ItemRecord {
            dataset: dataset.environment_id.clone(),
            index,
            start: item.goal.clone(),
            goal: item.start.clone(),
            outcome: Outcome::ParseFailure,
            output: None,
            raw_output: None,
            diagnostics: Vec::new(),
        };
        let answer = match method {
            Method::Explicit(reader) => reader
                .read(&item.instruction)
                .map_err(|e| format!("cannot read instruction: {e}"))
                .and_then(|p| p.reverse().map_err(|e| format!("cannot reverse: {e}"))),
            Method::Implicit { model, .. } => {
                match model.implicit_query(ImplicitMode::Reverse, std::slice::from_ref(&item.instruction), None) {
                    Ok(text) => {
                        let parsed = lenient_parse(&text, &vocabulary);
                        record.raw_output = Some(text);
                        parsed
                    }
                    Err(e) => Err(format!("model call failed: {e}")),
                }
            }
        };
        match answer {
            Err(e) => record.diagnostics.push(e),
            Ok(path) => {
                let expected = item.path.reverse().expect("dataset paths are valid");
                if path == expected {
                    record.outcome = Outcome::Shortest;
                } else {
                    record.outcome = Outcome::Wrong;
                    record.diagnostics.push(format!("expected {expected}"));
                }
                record.output = Some(path);
            }
        }
        report.push(record);
    }
    report
}

/// Holds out each item in turn and asks for its route given the other nine.
/// Answers are judged against the environment, not against the held-out
/// path, so any correct route counts.
pub fn eval_combined(dataset: &PathDataset, method: &Method<'_>) -> EvalReport {
    let mut report = EvalReport::new(Task::Combined, method);
    let vocabulary: Vec<NodeName> = dataset.environment.nodes().map(|(n, _)| n.clone()).collect();
    let read: Vec<Result<CanonicalPath, String>> = match method {
        Method::Explicit(reader) => dataset
            .items
            .iter()
            .map(|item| reader.read(&item.instruction).map_err(|e| e.to_string()))
            .collect(),
        Method::Implicit { .. } => Vec::new(),
    };
    for (index, item) in dataset.items.iter().enumerate() {
        let mut record = ItemRecord {
            dataset: dataset.environment_id.clone(),
            index,
            start: item.start.clone(),
            goal: item.goal.clone(),
            outcome: Outcome::ParseFailure,
            output: None,
            raw_output: None,
            diagnostics: Vec::new(),
        };
        let answer = match method {
            Method::Explicit(_) => {
                let mut map = TopoMap::new();
                for (j, path) in read.iter().enumerate().filter(|(j, _)| *j != index) {
                    match path {
                        Err(e) => record.diagnostics.push(format!("instruction {j} skipped: {e}")),
                        Ok(p) => {
                            if let Err(e) = map.add_path(p) {
                                let what = match e {
                                    MapError::Conflict(c) => c.to_string(),
                                    other => other.to_string(),
                                };
                                record.diagnostics.push(format!("instruction {j} skipped: {what}"));
                            }
                        }
                    }
                }
                let query = RouteQuery::new(item.start.clone(), item.goal.clone())
                    .expect("dataset endpoints differ");
                match find_route(&map, &query) {
                    Ok(route) => Ok(route),
                    Err(failure) => {
                        record.outcome = Outcome::InsufficientInformation;
                        record.diagnostics.push(format!("{}: {failure}", failure.kind()));
                        report.push(record);
                        continue;
                    }
                }
            }
            Method::Implicit { model, .. } => {
                let others: Vec<String> = dataset
                    .items
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != index)
                    .map(|(_, it)| it.instruction.clone())
                    .collect();
                match model.implicit_query(ImplicitMode::Combined, &others, Some((&item.start, &item.goal))) {
                    Ok(text) => {
                        let parsed = lenient_parse(&text, &vocabulary);
                        record.raw_output = Some(text);
                        parsed
                    }
                    Err(e) => Err(format!("model call failed: {e}")),
                }
            }
        };
        match answer {
            Err(e) => record.diagnostics.push(e),
            Ok(route) => {
                let score = dataset.environment.score_route(&item.start, &item.goal, &route, dataset.theta);
                record.outcome = match (score.reachable, score.shortest) {
                    (true, true) => Outcome::Shortest,
                    (true, false) => Outcome::Reachable,
                    _ => Outcome::Wrong,
                };
                record.diagnostics.extend(score.reason);
                record.output = Some(route);
            }
        }
        report.push(record);
    }
    report
}

/// Reads a route out of free text. Text the grammar accepts is parsed
/// strictly. Otherwise place names (known names, or anything in double
/// quotes) are collected in order of appearance, and a turn word between two
/// consecutive places sets the action at the first of them.
pub fn lenient_parse(text: &str, vocabulary: &[NodeName]) -> Result<CanonicalPath, String> {
    if let Ok(path) = parse_instruction(text) {
        return Ok(path);
    }
    let lower = text.to_lowercase();
    let mut names: Vec<&NodeName> = vocabulary.iter().collect();
    names.sort_by_key(|n| std::cmp::Reverse(n.key().len()));

    // (byte offset, end, name) of each mention, longest match wins
    let mut mentions: Vec<(usize, usize, NodeName)> = Vec::new();
    let mut covered = vec![false; lower.len()];
    for (s, e) in quoted_spans(text) {
        if let Ok(name) = NodeName::new(&text[s..e]) {
            covered[s - 1..e + 1].iter_mut().for_each(|c| *c = true);
            mentions.push((s - 1, e + 1, name));
        }
    }
    for name in names {
        let needle = name.as_str().to_lowercase();
        let mut from = 0;
        while let Some(pos) = lower[from..].find(&needle) {
            let s = from + pos;
            let e = s + needle.len();
            from = s + needle.len().max(1);
            let bounded = !is_word_byte(lower.as_bytes(), s.wrapping_sub(1))
                && !is_word_byte(lower.as_bytes(), e);
            if bounded && !covered[s..e].iter().any(|c| *c) {
                covered[s..e].iter_mut().for_each(|c| *c = true);
                mentions.push((s, e, name.clone()));
            }
        }
    }
    mentions.sort_by_key(|m| m.0);

    let mut waypoints: Vec<NodeName> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (s, e, name) in mentions {
        if waypoints.last() == Some(&name) {
            spans.last_mut().unwrap().1 = e;
            continue;
        }
        waypoints.push(name);
        spans.push((s, e));
    }
    if waypoints.len() < 2 {
        return Err(format!("found {} place name(s) in the answer", waypoints.len()));
    }
    let mut actions = Vec::new();
    for i in 1..waypoints.len() - 1 {
        let between = &lower[spans[i].1..spans[i + 1].0];
        actions.push(turn_word(between).unwrap_or(Action::Forward));
    }
    CanonicalPath::new(waypoints, actions).map_err(|e| e.to_string())
}

fn is_word_byte(bytes: &[u8], i: usize) -> bool {
    bytes.get(i).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
}

fn quoted_spans(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '"' {
            match open.take() {
                Some(s) => out.push((s, i)),
                None => open = Some(i + 1),
            }
        }
    }
    out
}

/// The last turn word in a stretch of text.
fn turn_word(text: &str) -> Option<Action> {
    let words: Vec<&str> = text
        .split(|c: char| !c.is_alphanumeric() && c != '-')
        .filter(|w| !w.is_empty())
        .collect();
    let mut found = None;
    for (i, w) in words.iter().enumerate() {
        let action = match *w {
            "left" => Some(Action::TurnLeft),
            "right" => Some(Action::TurnRight),
            "around" | "u-turn" => Some(Action::TurnAround),
            "back" if i > 0 && words[i - 1] == "turn" => Some(Action::TurnAround),
            "straight" | "forward" | "ahead" => Some(Action::Forward),
            _ => None,
        };
        if action.is_some() {
            found = action;
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::{toy_environment, PathItem};
    use crate::instruction::{generate_instruction, GrammarReader, ReadError};
    use crate::llm::LlmError;
    use crate::action::AngleThreshold;
    use Action::*;

    fn n(s: &str) -> NodeName {
        NodeName::new(s).unwrap()
    }

    fn path(w: &[&str], a: &[Action]) -> CanonicalPath {
        CanonicalPath::from_names(w, a).unwrap()
    }

    fn item(p: CanonicalPath) -> PathItem {
        PathItem {
            start: p.start().clone(),
            goal: p.goal().clone(),
            instruction: generate_instruction(&p).unwrap(),
            path: p,
        }
    }

    fn toy_dataset(paths: Vec<CanonicalPath>) -> PathDataset {
        let environment = toy_environment();
        PathDataset {
            environment_id: "toy".into(),
            seed: 0,
            theta: AngleThreshold::default(),
            environment,
            items: paths.into_iter().map(item).collect(),
        }
    }

    #[test]
    fn reverse_toy_item() {
        let ds = toy_dataset(vec![path(&["n1", "n2", "n3"], &[TurnRight])]);
        let r = eval_reverse(&ds, &Method::Explicit(&GrammarReader));
        assert_eq!(r.totals.succeeded_shortest, 1);
        assert_eq!(r.items[0].output, Some(path(&["n3", "n2", "n1"], &[TurnLeft])));
    }

    struct FlipsActions;

    impl PathReader for FlipsActions {
        fn read(&self, instruction: &str) -> Result<CanonicalPath, ReadError> {
            let mut p = GrammarReader.read(instruction)?;
            p.actions.iter_mut().for_each(|a| *a = a.inverse());
            Ok(p)
        }
        fn label(&self) -> String {
            "flip".into()
        }
    }

    #[test]
    fn faulty_reader_is_wrong() {
        let ds = toy_dataset(vec![path(&["n1", "n2", "n3"], &[TurnRight]), path(&["n1", "n2"], &[])]);
        let r = eval_reverse(&ds, &Method::Explicit(&FlipsActions));
        assert_eq!(r.items[0].outcome, Outcome::Wrong);
        assert_eq!(r.items[1].outcome, Outcome::Shortest);
        assert_eq!(r.totals.attempted, 2);
        assert_eq!(r.backend, "flip");
    }

    #[test]
    fn combined_toy_held_out() {
        let ds = toy_dataset(vec![
            path(&["n5", "n4", "n2", "n3"], &[TurnRight, TurnLeft]),
            path(&["n1", "n2", "n3"], &[TurnRight]),
            path(&["n1", "n2", "n4", "n5"], &[Forward, TurnLeft]),
        ]);
        let r = eval_combined(&ds, &Method::Explicit(&GrammarReader));
        assert_eq!(r.items[0].outcome, Outcome::Shortest);
        assert_eq!(r.items[0].output, Some(path(&["n5", "n4", "n2", "n3"], &[TurnRight, TurnLeft])));
        assert_eq!(r.totals.succeeded_shortest, 3);
    }

    #[test]
    fn missing_information_is_its_own_class() {
        let ds = toy_dataset(vec![
            path(&["n1", "n2", "n3"], &[TurnRight]),
            path(&["n2", "n4"], &[]),
            path(&["n3", "n2", "n4"], &[TurnRight]),
        ]);
        let r = eval_combined(&ds, &Method::Explicit(&GrammarReader));
        assert_eq!(r.items[0].outcome, Outcome::InsufficientInformation);
        assert!(r.items[0].diagnostics[0].starts_with("unknown-node"));
        let t = r.totals;
        assert_eq!(t.attempted, 3);
        assert_eq!(t.attempted, t.succeeded_reachable + t.failed_parse + t.failed_insufficient + t.failed_wrong);
    }

    struct Canned(Result<&'static str, ()>);

    impl ImplicitModel for Canned {
        fn implicit_query(&self, _: ImplicitMode, i: &[String], _: Option<(&NodeName, &NodeName)>) -> Result<String, LlmError> {
            assert!(!i.is_empty());
            self.0.map(str::to_string).map_err(|_| LlmError::Timeout)
        }
    }

    #[test]
    fn implicit_scoring() {
        let ds = toy_dataset(vec![path(&["n1", "n2", "n3"], &[TurnRight])]);
        let good = Canned(Ok("Sure! Start at n3, walk to n2, turn left there and continue to n1."));
        let r = eval_reverse(&ds, &Method::Implicit { model: &good, label: "canned".into() });
        assert_eq!(r.items[0].outcome, Outcome::Shortest, "{:?}", r.items[0]);
        let bad = Canned(Ok("Start at n3, go to n2, turn right, go to n1."));
        let r = eval_reverse(&ds, &Method::Implicit { model: &bad, label: "canned".into() });
        assert_eq!(r.items[0].outcome, Outcome::Wrong);
        let down = Canned(Err(()));
        let r = eval_reverse(&ds, &Method::Implicit { model: &down, label: "canned".into() });
        assert_eq!(r.items[0].outcome, Outcome::ParseFailure);
    }

    #[test]
    fn implicit_combined_longer_route_is_reachable() {
        let ds = toy_dataset(vec![path(&["n1", "n2", "n3"], &[TurnRight]), path(&["n2", "n4"], &[])]);
        let detour = Canned(Ok("Depart from n1 to n2. Then, proceed to n4. Then, turn around and proceed to n2. Then, turn left and proceed to n3."));
        let r = eval_combined(&ds, &Method::Implicit { model: &detour, label: "c".into() });
        assert_eq!(r.items[0].outcome, Outcome::Reachable);
        assert_eq!(r.items[1].outcome, Outcome::Wrong);
    }

    #[test]
    fn lenient_parser() {
        let vocab = vec![n("Dining Room"), n("Room"), n("Kitchen"), n("n1")];
        let p = lenient_parse("From the kitchen go straight to the dining room, then turn right into \"Pantry\".", &vocab).unwrap();
        assert_eq!(p, path(&["Kitchen", "Dining Room", "Pantry"], &[TurnRight]));
        let p = lenient_parse("Kitchen -> Room (turn around) -> Kitchen", &vocab).unwrap();
        assert_eq!(p.actions, vec![TurnAround]);
        assert!(lenient_parse("I cannot answer that.", &vocab).is_err());
        assert!(lenient_parse("n10 and n1", &vocab).is_err());
    }

    #[test]
    fn table_is_aligned() {
        let ds = toy_dataset(vec![path(&["n1", "n2", "n3"], &[TurnRight])]);
        let r = eval_reverse(&ds, &Method::Explicit(&GrammarReader));
        let table = render_table(&[r]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("reverse  explicit  grammar"));
        assert!(lines[2].ends_with("100.0      100.0"));
    }
}
