use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AlignError;

/// A story of n ≥ 1 sentences. Sentence indices are 1-based everywhere else in the crate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub story_id: String,
    pub sentences: Vec<String>,
}

impl Story {
    pub fn new(story_id: impl Into<String>, sentences: Vec<String>) -> Result<Self, AlignError> {
        let s = Story {
            story_id: story_id.into(),
            sentences,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if self.sentences.is_empty() || self.sentences.iter().any(|s| s.trim().is_empty()) {
            return Err(AlignError::EmptyStory(self.story_id.clone()));
        }
        Ok(())
    }

    /// Sentences joined with single spaces.
    pub fn full_text(&self) -> String {
        self.sentences.join(" ")
    }

    /// 1-based sentence lookup.
    pub fn sentence(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|i| self.sentences.get(i))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

pub fn read_stories(path: &Path) -> Result<Vec<Story>, AlignError> {
    let file = File::open(path).map_err(|e| AlignError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AlignError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let story: Story = serde_json::from_str(&line).map_err(|e| AlignError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source: e,
        })?;
        story.validate()?;
        out.push(story);
    }
    Ok(out)
}

pub fn write_stories(path: &Path, stories: &[Story]) -> Result<(), AlignError> {
    let file = File::create(path).map_err(|e| AlignError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in stories {
        writeln!(w, "{}", serde_json::to_string(s).expect("story serializes"))
            .map_err(|e| AlignError::io(path, e))?;
    }
    w.flush().map_err(|e| AlignError::io(path, e))
}
