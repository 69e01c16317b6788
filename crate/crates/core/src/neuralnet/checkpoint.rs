//! On-disk weight blobs: raw little-endian `f32`, one file per individual.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::solution::{Bounds, SolutionVector};
use super::topology::NetworkTopology;
use crate::{Error, Result};

/// Architecture and decoding parameters stored alongside weight blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub topology: NetworkTopology,
    pub bounds: Bounds,
    pub param_count: usize,
    /// Seeds the run was derived from, outermost first.
    pub seed_lineage: Vec<u64>,
}

impl CheckpointHeader {
    pub fn new(topology: &NetworkTopology, bounds: Bounds, seed_lineage: Vec<u64>) -> Result<Self> {
        Ok(Self {
            topology: topology.clone(),
            bounds,
            param_count: topology.param_count()?,
            seed_lineage,
        })
    }
}

/// File name of the blob for individual `index` of a group (`pop`, `archive`).
pub fn blob_name(group: &str, index: usize) -> String {
    format!("{group}_{index:05}.f32")
}

pub fn write_blob(path: &Path, theta: &SolutionVector) -> Result<()> {
    let bytes: Vec<u8> = theta
        .weights()
        .iter()
        .flat_map(|w| w.to_le_bytes())
        .collect();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_blob(path: &Path, header: &CheckpointHeader) -> Result<SolutionVector> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::data(format!("{}: length not a multiple of 4", path.display())));
    }
    let weights: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Error::check_len("weight blob", header.param_count, weights.len())?;
    SolutionVector::new(weights, header.bounds).map_err(|e| Error::data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::init_random;
    use crate::simworld::GridGeometry;

    #[test]
    fn blob_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let topo = NetworkTopology::desk_scale(GridGeometry::new(16, 16, 1.0).unwrap(), 2, 3);
        let theta = init_random(&topo, 5, Bounds::default()).unwrap();
        let header = CheckpointHeader::new(&topo, Bounds::default(), vec![5]).unwrap();
        let path = dir.path().join(blob_name("pop", 0));
        write_blob(&path, &theta).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len() as usize, 4 * theta.len());
        assert!(read_blob(&path, &header).unwrap().bit_eq(&theta));

        fs::write(&path, [0u8; 8]).unwrap();
        assert!(read_blob(&path, &header).is_err());
    }
}
