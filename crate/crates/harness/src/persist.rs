//! Episode traces as JSONL: a header line, one line per step, one line per
//! decomposition node, and a closing result line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use stateact_core::adapt::{DecompositionNode, NodeOutcome};
use stateact_core::{AgentVariant, Dialect, StepRecord, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub variant: AgentVariant,
    pub variant_label: String,
    pub dialect: Dialect,
    pub seed: u64,
    pub env_id: String,
    pub environment: String,
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
}

/// A step record, tagged with its decomposition node when one ran it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(flatten)]
    pub record: StepRecord,
}

/// A decomposition node without its children; the tree is rebuilt from
/// parent pointers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLine {
    pub id: String,
    pub parent: Option<String>,
    pub task: String,
    pub depth: usize,
    pub outcome: NodeOutcome,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl NodeLine {
    /// Flattens a tree in pre-order.
    pub fn flatten(root: &DecompositionNode) -> Vec<NodeLine> {
        root.walk()
            .into_iter()
            .map(|n| NodeLine {
                id: n.id.clone(),
                parent: n.parent.clone(),
                task: n.task.clone(),
                depth: n.depth,
                outcome: n.outcome,
                success: n.success,
                note: n.note.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultLine {
    pub success: bool,
    pub steps_taken: usize,
    pub max_steps: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TraceLine {
    Header(Header),
    Step(StepLine),
    Node(NodeLine),
    Result(ResultLine),
}

/// Everything one episode file holds.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFile {
    pub header: Header,
    pub steps: Vec<StepLine>,
    pub nodes: Vec<NodeLine>,
    pub result: ResultLine,
}

impl EpisodeFile {
    pub fn records(&self) -> Vec<StepRecord> {
        self.steps.iter().map(|s| s.record.clone()).collect()
    }

    pub fn lines(&self) -> Vec<TraceLine> {
        let mut out = vec![TraceLine::Header(self.header.clone())];
        out.extend(self.steps.iter().cloned().map(TraceLine::Step));
        out.extend(self.nodes.iter().cloned().map(TraceLine::Node));
        out.push(TraceLine::Result(self.result.clone()));
        out
    }

    /// The exact bytes `write` produces.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for line in self.lines() {
            // Every field serializes to JSON without failure.
            s.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
            s.push('\n');
        }
        s
    }

    /// Writes the file in one go; refuses to replace an existing file.
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let file = File::options().write(true).create_new(true).open(path)?;
        let mut out = BufWriter::new(file);
        out.write_all(self.to_jsonl().as_bytes())?;
        out.flush()
    }
}

/// Outcome of reading one file: the episode if it has a header and a result,
/// and the number of lines that failed to parse.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadEpisode {
    pub episode: Option<EpisodeFile>,
    pub corrupt_lines: usize,
}

pub fn read_episode(path: &Path) -> io::Result<ReadEpisode> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = None;
    let mut steps = Vec::new();
    let mut nodes = Vec::new();
    let mut result = None;
    let mut corrupt = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TraceLine>(&line) {
            Ok(TraceLine::Header(h)) => header = Some(h),
            Ok(TraceLine::Step(s)) => steps.push(s),
            Ok(TraceLine::Node(n)) => nodes.push(n),
            Ok(TraceLine::Result(r)) => result = Some(r),
            Err(e) => {
                log::warn!("{}: skipping unreadable line: {e}", path.display());
                corrupt += 1;
            }
        }
    }
    let episode = match (header, result) {
        (Some(header), Some(result)) => Some(EpisodeFile { header, steps, nodes, result }),
        _ => None,
    };
    Ok(ReadEpisode { episode, corrupt_lines: corrupt })
}
