// Copyright 2026 The DCSL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DCSL_HARNESS_EXPORT_HPP_
#define DCSL_HARNESS_EXPORT_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace dcsl {

struct ExportReport {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

// Reads a run directory holding seed_<s>/ children, or a directory of such
// variant directories, and writes into `out_dir`:
//   curves.csv   variant,mode,episode,seeds,return_mean,return_std,success_mean,success_std
//   ablation.csv variant,mode,seeds,success_mean,success_std,timesteps_mean,timesteps_std
//   lengths.csv  variant,length,seeds,count_mean,count_std
// Standard deviations are population (divide by n) across seeds. Missing
// stages are skipped and listed in `warnings`.
ExportReport export_run(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

}  // namespace dcsl

#endif  // DCSL_HARNESS_EXPORT_HPP_
