#pragma once

#include "tmm/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tmm {

inline constexpr int kSchemaVersion = 1;

/**
 * Line-delimited JSON trajectory stream. Each trajectory is
 *
 *   {"record":"header", "schema_version":1, "scenario":..., "seed":..., "steps":k, "capped":...}
 *   {"record":"step", "t":0, "state":{...}, "actions":{"<agent>":"<label>", ...}}
 *   ...
 *   {"record":"step", "t":k, "state":{...}}
 *   {"record":"evaluation", "ground_truth":{"<agent>":"<latent>", ...}}   (optional)
 *
 * The step records hold observable features only; latent values live solely
 * in the evaluation record.
 */
void write_trajectory(std::ostream &out, const Scenario &sc, const Trajectory &traj,
                      bool include_ground_truth = true);

/// Reads every trajectory in the stream. Throws SchemaError naming the line.
std::vector<Trajectory> read_trajectories(std::istream &in, const Scenario &sc);

std::string serialize_trajectory(const Scenario &sc, const Trajectory &traj, bool include_ground_truth = true);
Trajectory deserialize_trajectory(const Scenario &sc, const std::string &text);

void write_dataset(const std::filesystem::path &path, const Scenario &sc, const std::vector<Trajectory> &data);
std::vector<Trajectory> read_dataset(const std::filesystem::path &path, const Scenario &sc);

/// Drops evaluation records from a serialized stream.
std::string strip_ground_truth(const std::string &text);

} // namespace tmm
