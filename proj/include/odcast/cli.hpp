#pragma once

#include <string>
#include <vector>

#include "odcast/config.hpp"

namespace odcast {

// Subcommand bodies; they throw UserError / InternalError on failure, and
// run_cli maps those to exit codes 1 / 2.
void cmd_generate(const RunConfig& config, const std::string& out_dir);
void cmd_ingest(const RunConfig& config, const std::string& orders_path, const std::string& out_dir);
void cmd_train(const RunConfig& config, const std::string& corpus_dir, const std::string& out_dir);
void cmd_evaluate(const RunConfig& config, const std::string& corpus_dir, const std::string& checkpoint_path,
                  const std::string& predictor, const std::string& out_dir);
void cmd_predict(const RunConfig& config, const std::string& corpus_dir, const std::string& checkpoint_path,
                 int day, int slot, const std::string& out_dir);
void cmd_ablate(const RunConfig& config, const std::string& corpus_dir, const std::string& out_dir);
void cmd_sweep(const RunConfig& config, const std::string& orders_path, const std::string& param,
               const std::vector<double>& values, const std::string& out_dir);

int run_cli(int argc, char** argv);

}  // namespace odcast
