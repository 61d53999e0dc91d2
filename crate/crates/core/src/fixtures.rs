//! Reference scenarios: the Hyde Park Corner congestion BoM and the
//! two-assembly labelling/training chain.

use crate::error::Result;
use crate::gateway::{Gateway, NewAssembly};
use crate::id::{AssemblyId, BomId, ComponentId};
use crate::model::{ComponentKind, Millis};

/// HPC Congestion manifest, wrapped in braces so it parses as a document.
pub const HPC_MANIFEST: &str = r#"{"bom": {
      "name": "HPC Congestion",
      "description": "Determine congestion levels on Hyde Park Corner",
      "assemblies": [
        {
          "name": "Traffic Scene Analysis",
          "description": "Determine congestion at Hyde Park Corner",
          "inputData": [
            {
              "name": "Traffic Scene",
              "dataAccess": "https://xyz.com/00001.06514.jpg"
            }
          ],
          "outputData": [
            {
              "name": "Result"
            }
          ],
          "inputArtifacts": [
            {
              "name": "Congestion Model"
            }
          ]
        }
      ]
    }}
"#;

/// Ids of the labelling/training chain.
#[derive(Debug, Clone)]
pub struct Chain {
    pub data_1: ComponentId,
    pub artifact_1: ComponentId,
    pub data_1p: ComponentId,
    pub artifact_2: ComponentId,
    pub artifact_2p: ComponentId,
    pub assembly_1: AssemblyId,
    pub assembly_2: AssemblyId,
    pub bom: BomId,
}

/// Data 1 + Artifact 1 -> Assembly 1 -> Data 1'; Data 1' + Artifact 2 ->
/// Assembly 2 -> Artifact 2'.
pub fn two_assembly_chain(gw: &mut Gateway, now: Millis) -> Result<Chain> {
    let data_1 = gw.create_component(ComponentKind::DataSource, "Data 1", None, &[])?.id;
    let artifact_1 = gw.create_component(ComponentKind::Artifact, "Artifact 1", None, &[])?.id;
    let data_1p = gw.create_component(ComponentKind::DataSource, "Data 1'", None, &[])?.id;
    let artifact_2 = gw.create_component(ComponentKind::Artifact, "Artifact 2", None, &[])?.id;
    let artifact_2p = gw.create_component(ComponentKind::Artifact, "Artifact 2'", None, &[])?.id;
    let assembly_1 = gw
        .create_assembly(&NewAssembly {
            name: "Assembly 1".into(),
            description: Some("data labelling".into()),
            input_data: vec![data_1.clone()],
            input_artifacts: vec![artifact_1.clone()],
            output_data: vec![data_1p.clone()],
            output_artifacts: vec![],
        })?
        .id;
    let assembly_2 = gw
        .create_assembly(&NewAssembly {
            name: "Assembly 2".into(),
            description: Some("model training".into()),
            input_data: vec![data_1p.clone()],
            input_artifacts: vec![artifact_2.clone()],
            output_data: vec![],
            output_artifacts: vec![artifact_2p.clone()],
        })?
        .id;
    let bom = gw.create_bom("Simple BoM", None, vec![assembly_1.clone(), assembly_2.clone()], now)?.id;
    Ok(Chain { data_1, artifact_1, data_1p, artifact_2, artifact_2p, assembly_1, assembly_2, bom })
}

/// A multi-BoM layout described by indexes, before any ids exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphPlan {
    pub kinds: Vec<ComponentKind>,
    /// (inputs, outputs) per assembly, as component indexes.
    pub assemblies: Vec<(Vec<usize>, Vec<usize>)>,
    /// Assembly indexes per BoM. Every assembly belongs to exactly one.
    pub boms: Vec<Vec<usize>>,
}

/// Ids created by [`GraphPlan::install`], parallel to the plan's vectors.
#[derive(Debug, Clone)]
pub struct Installed {
    pub components: Vec<ComponentId>,
    pub assemblies: Vec<AssemblyId>,
    pub boms: Vec<BomId>,
}

impl GraphPlan {
    /// Draws a layout that passes validation: each component gets a rank,
    /// every assembly reads below a cut and writes at or above it, and each
    /// component is written at most once.
    pub fn random(rng: &mut impl rand::Rng, max_components: usize, max_assemblies: usize, max_boms: usize) -> Self {
        use rand::seq::SliceRandom;

        let n = rng.random_range(2..=max_components);
        let kinds: Vec<ComponentKind> = (0..n)
            .map(|_| if rng.random_bool(0.6) { ComponentKind::DataSource } else { ComponentKind::Artifact })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut produced = vec![false; n];
        let mut assemblies = Vec::new();
        for _ in 0..rng.random_range(1..=max_assemblies) {
            let cut = rng.random_range(1..n);
            let mut inputs: Vec<usize> = order[..cut].iter().copied().filter(|_| rng.random_bool(0.25)).collect();
            let mut outputs: Vec<usize> =
                order[cut..].iter().copied().filter(|&c| !produced[c] && rng.random_bool(0.15)).collect();
            inputs.shuffle(rng);
            outputs.shuffle(rng);
            for &c in &outputs {
                produced[c] = true;
            }
            assemblies.push((inputs, outputs));
        }
        let bom_count = rng.random_range(1..=max_boms.min(assemblies.len()));
        let mut boms = vec![Vec::new(); bom_count];
        for a in 0..assemblies.len() {
            boms[rng.random_range(0..bom_count)].push(a);
        }
        Self { kinds, assemblies, boms }
    }

    pub fn install(&self, gw: &mut Gateway, now: Millis) -> Result<Installed> {
        let components = self
            .kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| gw.create_component(kind, &format!("c{i}"), None, &[]).map(|c| c.id))
            .collect::<Result<Vec<_>>>()?;
        let mut assemblies = Vec::new();
        for (i, (inputs, outputs)) in self.assemblies.iter().enumerate() {
            let mut a = NewAssembly { name: format!("a{i}"), ..Default::default() };
            for &c in inputs {
                match self.kinds[c] {
                    ComponentKind::DataSource => a.input_data.push(components[c].clone()),
                    ComponentKind::Artifact => a.input_artifacts.push(components[c].clone()),
                }
            }
            for &c in outputs {
                match self.kinds[c] {
                    ComponentKind::DataSource => a.output_data.push(components[c].clone()),
                    ComponentKind::Artifact => a.output_artifacts.push(components[c].clone()),
                }
            }
            assemblies.push(gw.create_assembly(&a)?.id);
        }
        let boms = self
            .boms
            .iter()
            .enumerate()
            .map(|(i, members)| {
                let ids = members.iter().map(|&a| assemblies[a].clone()).collect();
                gw.create_bom(&format!("b{i}"), None, ids, now).map(|b| b.id)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Installed { components, assemblies, boms })
    }
}
