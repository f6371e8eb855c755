use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Mutex;

use egoqa_core::fusion::{InstanceId, Rle};
use egoqa_core::io::{open, read_jsonl, MaskRecord};
use egoqa_core::metrics::MaskSource;

/// Resolves `<file>#<instance_id>` against mask JSONL files; relative files
/// are taken from `base_dir`. Parsed files are cached.
pub struct JsonlMaskSource {
    pub base_dir: PathBuf,
    cache: Mutex<HashMap<PathBuf, std::sync::Arc<Vec<MaskRecord>>>>,
}

impl JsonlMaskSource {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        Self {
            base_dir: base_dir.into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn records(&self, path: PathBuf) -> Result<std::sync::Arc<Vec<MaskRecord>>, String> {
        if let Some(r) = self.cache.lock().unwrap().get(&path) {
            return Ok(r.clone());
        }
        let recs: Vec<MaskRecord> = open(&path)
            .and_then(read_jsonl)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let recs = std::sync::Arc::new(recs);
        self.cache.lock().unwrap().insert(path, recs.clone());
        Ok(recs)
    }
}

impl MaskSource for JsonlMaskSource {
    fn load(&self, masks_ref: &str) -> Result<BTreeMap<u64, Rle>, String> {
        let (file, id) = masks_ref
            .rsplit_once('#')
            .ok_or_else(|| format!("masks_ref {masks_ref:?} is not <file>#<instance_id>"))?;
        let id: InstanceId = id.parse().map_err(|_| format!("masks_ref {masks_ref:?}: bad instance id"))?;
        let recs = self.records(self.base_dir.join(file))?;
        let mut out = BTreeMap::new();
        for r in recs.iter().filter(|r| r.instance_id == id) {
            out.insert(r.frame_index, r.mask().map_err(|e| format!("{masks_ref}: frame {}: {e}", r.frame_index))?);
        }
        if out.is_empty() {
            return Err(format!("masks_ref {masks_ref:?}: no records"));
        }
        Ok(out)
    }
}
