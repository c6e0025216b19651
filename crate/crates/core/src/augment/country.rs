use serde_json::Value;

use super::{templates, PipelineConfig, StageError};
use crate::country::CountryTag;
use crate::gateway::{extract_json, ChatClient};
use crate::model::QaPair;
use crate::prompt::fill;

/// Asks the model which Arab country the question refers to.
pub async fn identify_country(
    qa: &QaPair,
    client: &dyn ChatClient,
    cfg: &PipelineConfig,
) -> Result<CountryTag, StageError> {
    let user = fill(templates::COUNTRY_USER, &[("question", &qa.question)]);
    let request = cfg.request(templates::COUNTRY_SYSTEM, user, cfg.temperatures.country);
    let reply = client.complete(&request, 0).await?;
    let object = extract_json(&reply.content)?;
    match object.get("country") {
        Some(Value::String(name)) => Ok(CountryTag::from_name(name)?),
        Some(other) => Err(StageError::Schema(format!("`country` is not a string: {other}"))),
        None => Err(StageError::Schema("missing `country`".into())),
    }
}
