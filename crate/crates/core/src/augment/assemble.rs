use rand::seq::SliceRandom;

use super::StageError;
use crate::model::{Lineage, McqItem, QaPair, OPTION_COUNT};
use crate::prompt::render_train_example;
use crate::seeding;
use crate::text;
use crate::tokens::TokenCounter;

/// Shuffles `[answer, d1, d2, d3]` with a generator keyed on
/// `(seed, qa.id)` and records where the answer landed.
pub fn assemble_mcq(
    qa: &QaPair,
    distractors: &[String; 3],
    seed: u64,
    distractor_model: &str,
) -> Result<McqItem, StageError> {
    let answer = qa.answer.trim().to_string();
    let pool: [String; OPTION_COUNT] = [
        answer.clone(),
        distractors[0].trim().to_string(),
        distractors[1].trim().to_string(),
        distractors[2].trim().to_string(),
    ];
    let normalized: Vec<String> = pool.iter().map(|o| text::normalize(o)).collect();
    for i in 0..OPTION_COUNT {
        for j in (i + 1)..OPTION_COUNT {
            if normalized[i] == normalized[j] {
                return Err(StageError::DuplicateOption { first: i, second: j });
            }
        }
    }

    let mut order: [usize; OPTION_COUNT] = [0, 1, 2, 3];
    order.shuffle(&mut seeding::rng_for(seed, "options", &qa.id));
    let gold_index = order.iter().position(|&src| src == 0).expect("answer present") as u8;
    let options = order.map(|src| pool[src].clone());

    Ok(McqItem {
        id: qa.id.clone(),
        question: qa.question.clone(),
        options,
        gold_index,
        country: qa.country.clone(),
        lineage: Some(Lineage {
            source_qa_id: qa.id.clone(),
            distractor_model: distractor_model.to_string(),
            shuffle_seed: seed,
            answer: Some(answer),
        }),
        token_count: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardVerdict {
    Pass(Box<McqItem>),
    Reject { count: usize },
}

/// Counts tokens over the full rendered training sequence. Counts equal to
/// the limit pass.
pub fn guard_token_limit(item: McqItem, counter: &dyn TokenCounter, limit: usize) -> GuardVerdict {
    let count = counter.count(&render_train_example(&item).text);
    if count <= limit {
        GuardVerdict::Pass(Box::new(McqItem {
            token_count: Some(count as u32),
            ..item
        }))
    } else {
        GuardVerdict::Reject { count }
    }
}
