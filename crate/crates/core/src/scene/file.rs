//! TOML scene files. See `docs/scene-format.md` for the schema.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scene, SceneError};

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SceneFile {
    format_version: u32,
    #[serde(flatten)]
    scene: Scene,
}

pub fn parse_scene(text: &str, origin: &str) -> Result<Scene, SceneError> {
    let file: SceneFile = toml::from_str(text).map_err(|e| SceneError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    if file.format_version != SCENE_FORMAT_VERSION {
        return Err(SceneError::Parse {
            path: origin.to_string(),
            message: format!(
                "unsupported format_version {} (expected {SCENE_FORMAT_VERSION})",
                file.format_version
            ),
        });
    }
    file.scene.validate()?;
    Ok(file.scene)
}

pub fn scene_to_toml(scene: &Scene) -> String {
    let file = SceneFile {
        format_version: SCENE_FORMAT_VERSION,
        scene: scene.clone(),
    };
    toml::to_string(&file).expect("scene serializes to TOML")
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene(&text, &path.display().to_string())
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    fs::write(path, scene_to_toml(scene)).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads every `*.toml` file in `dir`, ordered by file name. Scene ids must be unique.
pub fn load_suite(dir: impl AsRef<Path>) -> Result<Vec<Scene>, SceneError> {
    let dir = dir.as_ref();
    let io_err = |source| SceneError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.extension().is_some_and(|e| e == "toml") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(SceneError::Parse {
            path: dir.display().to_string(),
            message: "no scene files (*.toml) found".into(),
        });
    }
    let scenes = paths.iter().map(load_scene).collect::<Result<Vec<_>, _>>()?;
    let mut ids: Vec<&str> = scenes.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(SceneError::Parse {
            path: dir.display().to_string(),
            message: format!("duplicate scene id {:?}", w[0]),
        });
    }
    Ok(scenes)
}
