#pragma once

#include <utility>
#include <vector>

#include "tetsolve/adaptive_cg.hpp"
#include "tetsolve/fault.hpp"
#include "tetsolve/material.hpp"
#include "tetsolve/mesh.hpp"

namespace tetsolve {

/// A mesh with materials and the full solver hierarchy, ready to solve.
struct CrustModel {
  Mesh mesh;
  std::vector<Material> materials;
  std::vector<uint8_t> mask;
  SolverLevels levels;
};

inline CrustModel build_crust_model(Mesh mesh, std::vector<Material> materials,
                                    const SolverConfig& cfg, int workers = 1) {
  CrustModel model;
  model.mask = dirichlet_mask(mesh);
  model.levels = build_solver_levels(mesh, materials, model.mask, cfg, workers);
  model.mesh = std::move(mesh);
  model.materials = std::move(materials);
  return model;
}

/// A crust model with an embedded fault: the solve still runs on the unsplit
/// hierarchy (split pairs are tied through their base node); the split mesh
/// only provides the raw stiffness action for slip lifting.
struct FaultedModel {
  CrustModel base;
  Mesh split_mesh;
  FaultPatch patch;
  EbeOperator<double> split_raw; // unmasked, second order, on the split mesh
};

inline FaultedModel build_faulted_model(Mesh mesh, std::vector<Material> materials,
                                        const std::vector<std::array<int32_t, 3>>& fault_tris,
                                        const SolverConfig& cfg, int workers = 1) {
  FaultedModel fm;
  auto [split, patch] = split_nodes(mesh, fault_tris);
  fm.split_mesh = std::move(split);
  fm.patch = std::move(patch);
  fm.split_raw = EbeOperator<double>(fm.split_mesh, 2, materials, {}, workers);
  fm.base = build_crust_model(std::move(mesh), std::move(materials), cfg, workers);
  return fm;
}

inline VectorBatch64 slip_to_rhs(const FaultedModel& fm, const UnitSlip& slip) {
  return slip_to_rhs(fm.split_raw, fm.patch, slip_vectors(fm.patch, slip), fm.base.mask,
                     fm.base.mesh.node_count());
}

} // namespace tetsolve
