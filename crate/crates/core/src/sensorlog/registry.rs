use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::BeaconId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AedRecord {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Floor label such as `"2F"` or `"B1"`.
    pub floor: String,
    pub building_id: String,
    pub beacon: BeaconId,
    /// Accepted for compatibility with upstream AED databases; unused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub altitude_m: Option<f64>,
}

impl AedRecord {
    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    pub building_id: String,
    pub bssids: BTreeSet<String>,
    pub entry_point: GeoPoint,
}

/// AED and building registries. Construct through [`Registry::new`] or
/// [`load_registry`] to get the uniqueness checks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Registry {
    pub aeds: Vec<AedRecord>,
    pub buildings: Vec<BuildingRecord>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid registry JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate AED id `{0}`")]
    DuplicateAed(String),
    #[error("beacon {beacon} assigned to both `{first}` and `{second}`")]
    DuplicateBeacon {
        beacon: BeaconId,
        first: String,
        second: String,
    },
    #[error("duplicate building id `{0}`")]
    DuplicateBuilding(String),
    #[error("BSSID `{bssid}` belongs to both `{first}` and `{second}`")]
    OverlappingBssid {
        bssid: String,
        first: String,
        second: String,
    },
    #[error("coordinates of `{0}` out of range")]
    InvalidCoordinates(String),
    #[error("AED `{aed}` references unknown building `{building}`")]
    UnknownBuilding { aed: String, building: String },
}

impl Registry {
    pub fn new(aeds: Vec<AedRecord>, buildings: Vec<BuildingRecord>) -> Result<Self, RegistryError> {
        let registry = Self { aeds, buildings };
        registry.validate()?;
        Ok(registry)
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        let mut building_ids = HashSet::new();
        let mut bssid_owner: HashMap<&str, &str> = HashMap::new();
        for b in &self.buildings {
            if !building_ids.insert(b.building_id.as_str()) {
                return Err(RegistryError::DuplicateBuilding(b.building_id.clone()));
            }
            if !b.entry_point.is_valid() {
                return Err(RegistryError::InvalidCoordinates(b.building_id.clone()));
            }
            for bssid in &b.bssids {
                if let Some(first) = bssid_owner.insert(bssid, &b.building_id) {
                    return Err(RegistryError::OverlappingBssid {
                        bssid: bssid.clone(),
                        first: first.to_owned(),
                        second: b.building_id.clone(),
                    });
                }
            }
        }

        let mut aed_ids = HashSet::new();
        let mut beacon_owner: HashMap<&BeaconId, &str> = HashMap::new();
        for aed in &self.aeds {
            if !aed_ids.insert(aed.id.as_str()) {
                return Err(RegistryError::DuplicateAed(aed.id.clone()));
            }
            if !aed.position().is_valid() {
                return Err(RegistryError::InvalidCoordinates(aed.id.clone()));
            }
            if let Some(first) = beacon_owner.insert(&aed.beacon, &aed.id) {
                return Err(RegistryError::DuplicateBeacon {
                    beacon: aed.beacon.clone(),
                    first: first.to_owned(),
                    second: aed.id.clone(),
                });
            }
            if !building_ids.contains(aed.building_id.as_str()) {
                return Err(RegistryError::UnknownBuilding {
                    aed: aed.id.clone(),
                    building: aed.building_id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn aed(&self, id: &str) -> Option<&AedRecord> {
        self.aeds.iter().find(|a| a.id == id)
    }

    pub fn building(&self, id: &str) -> Option<&BuildingRecord> {
        self.buildings.iter().find(|b| b.building_id == id)
    }

    /// The building housing AED `id`.
    pub fn building_of(&self, aed_id: &str) -> Option<&BuildingRecord> {
        self.aed(aed_id).and_then(|a| self.building(&a.building_id))
    }
}

/// Reads and validates a registry JSON document:
///
/// ```json
/// { "aeds": [{"id", "name", "lat", "lon", "floor", "building_id",
///             "beacon": {"uuid", "major", "minor"}, "altitude_m"?}],
///   "buildings": [{"building_id", "bssids": [..], "entry_point": {"lat", "lon"}}] }
/// ```
pub fn load_registry(path: &Path) -> Result<Registry, RegistryError> {
    let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let registry: Registry = serde_json::from_str(&text).map_err(|source| RegistryError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    registry.validate()?;
    Ok(registry)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aed(id: &str, minor: u16, building: &str) -> AedRecord {
        AedRecord {
            id: id.into(),
            name: format!("{id} hall"),
            lat: 35.0 + f64::from(minor) * 1e-4,
            lon: 135.0,
            floor: "1F".into(),
            building_id: building.into(),
            beacon: BeaconId {
                uuid: "E2C56DB5-DFFB-48D2-B060-D0F5A71096E0".into(),
                major: 1,
                minor,
            },
            altitude_m: None,
        }
    }

    fn building(id: &str, bssids: &[&str]) -> BuildingRecord {
        BuildingRecord {
            building_id: id.into(),
            bssids: bssids.iter().map(|s| s.to_string()).collect(),
            entry_point: GeoPoint::new(35.0, 135.0),
        }
    }

    #[test]
    fn six_aed_campus() {
        let buildings = vec![building("B1", &["a1", "a2"]), building("B2", &["b1"])];
        let aeds = (1..=6)
            .map(|i| aed(&format!("AED-{i}"), i, if i % 2 == 0 { "B1" } else { "B2" }))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.json");
        std::fs::write(&path, serde_json::to_string(&Registry { aeds, buildings }).unwrap()).unwrap();
        let reg = load_registry(&path).unwrap();
        assert_eq!(reg.aeds.len(), 6);
        assert_eq!(reg.building_of("AED-2").unwrap().building_id, "B1");
    }

    #[test]
    fn empty_registry_is_valid() {
        let reg = Registry::new(vec![], vec![]).unwrap();
        assert!(reg.aeds.is_empty() && reg.buildings.is_empty());
    }

    #[test]
    fn shared_bssid_is_rejected() {
        let err = Registry::new(vec![], vec![building("B1", &["x", "y"]), building("B2", &["y"])])
            .unwrap_err();
        assert!(matches!(err, RegistryError::OverlappingBssid { ref bssid, .. } if bssid == "y"));
    }

    #[test]
    fn duplicate_aed_id_is_rejected() {
        let err = Registry::new(
            vec![aed("A", 1, "B1"), aed("A", 2, "B1")],
            vec![building("B1", &["x"])],
        )
        .unwrap_err();
        assert!(matches!(err, RegistryError::DuplicateAed(_)));
    }

    #[test]
    fn duplicate_beacon_is_rejected() {
        let err = Registry::new(
            vec![aed("A", 1, "B1"), aed("B", 1, "B1")],
            vec![building("B1", &["x"])],
        )
        .unwrap_err();
        assert!(matches!(err, RegistryError::DuplicateBeacon { .. }));
    }

    #[test]
    fn out_of_range_latitude_is_rejected() {
        let mut bad = aed("A", 1, "B1");
        bad.lat = 91.0;
        let err = Registry::new(vec![bad], vec![building("B1", &["x"])]).unwrap_err();
        assert!(matches!(err, RegistryError::InvalidCoordinates(_)));
    }

    #[test]
    fn altitude_is_accepted_but_optional() {
        let json = r#"{"aeds":[{"id":"A","name":"n","lat":1,"lon":2,"floor":"B1",
            "building_id":"B","beacon":{"uuid":"u","major":0,"minor":0},"altitude_m":42.5}],
            "buildings":[{"building_id":"B","bssids":[],"entry_point":{"lat":1,"lon":2}}]}"#;
        let reg: Registry = serde_json::from_str(json).unwrap();
        reg.validate().unwrap();
        assert_eq!(reg.aeds[0].altitude_m, Some(42.5));
    }
}
