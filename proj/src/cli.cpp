#include "odcast/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "odcast/baselines.hpp"
#include "odcast/errors.hpp"
#include "odcast/metrics.hpp"
#include "odcast/params.hpp"
#include "odcast/rng.hpp"
#include "odcast/synth.hpp"

namespace odcast {

namespace fs = std::filesystem;

namespace {

void echo_config(const RunConfig& config, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "config_resolved.json").string(), config.to_json() + "\n");
}

// Train/val/test day ranges; corpora below the 10-day split minimum train on
// everything (used by predict, which only needs history and normalizers).
SplitPlan split_or_all(const Corpus& corpus) {
    if (corpus.days >= 10) return split(corpus.days);
    SplitPlan plan;
    plan.train_end = corpus.days;
    plan.val_begin = plan.val_end = corpus.days;
    plan.test_begin = plan.test_end = corpus.days;
    return plan;
}

struct TrainedRun {
    ModelParams params;
    TrainResult result;
    SplitPlan plan;
};

TrainedRun train_on_corpus(const RunConfig& config, const Corpus& corpus) {
    const SplitPlan plan = split(corpus.days);
    ForecastEngine engine(corpus, config.model, plan.train_end);
    const auto train_targets = engine.targets_in_days(plan.train_begin, plan.train_end);
    const auto val_targets = engine.targets_in_days(plan.val_begin, plan.val_end);
    if (train_targets.empty())
        throw UserError("train: no targets with full history; reduce temporal.n_days or add days");
    TrainedRun run;
    run.plan = plan;
    ModelParams init = ModelParams::init(config.model.dims, config.seed);
    run.result = train(engine, std::move(init), train_targets, val_targets, config.train);
    run.params = run.result.best;
    return run;
}

EvaluationResult evaluate_on_test(const RunConfig& config, const Corpus& corpus, const ModelParams& params,
                                  const SplitPlan& plan) {
    ForecastEngine engine(corpus, config.model, plan.train_end);
    const HistoryStats history = history_stats(corpus, plan.train_begin, plan.train_end);
    const auto targets = engine.targets_in_days(plan.test_begin, plan.test_end);
    if (targets.empty()) throw UserError("evaluate: no test targets with full history");
    return evaluate(corpus, model_predictor(engine, params), targets, history, config.model.lambda_blend,
                    config.fingerprint());
}

void write_metrics(const EvaluationResult& result, const std::string& path) {
    nlohmann::ordered_json j;
    j["demand"] = nlohmann::ordered_json::parse(result.demand.to_json());
    j["od"] = nlohmann::ordered_json::parse(result.od.to_json());
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

void cmd_generate(const RunConfig& config, const std::string& out_dir) {
    config.validate();
    echo_config(config, out_dir);
    const std::string path = (fs::path(out_dir) / "orders.csv").string();
    generate_to_file(config.scenario, path);
    std::cout << "generate: wrote " << path << "\n";
}

void cmd_ingest(const RunConfig& config, const std::string& orders_path, const std::string& out_dir) {
    config.validate();
    echo_config(config, out_dir);
    ParseResult parsed = parse_orders(orders_path);
    Corpus corpus = build_od(parsed.records, config.grid, config.granularity_min);
    corpus.skipped_parse = parsed.skipped;
    const std::string corpus_dir = (fs::path(out_dir) / "corpus").string();
    save_corpus(corpus, corpus_dir);

    nlohmann::ordered_json summary;
    summary["records_accepted"] = corpus.accepted;
    summary["records_skipped_parse"] = corpus.skipped_parse;
    summary["records_skipped_bounds"] = corpus.skipped_bounds;
    summary["days"] = corpus.days;
    summary["slots_per_day"] = corpus.days > 0 ? corpus.slots_per_day() : 0;
    long nonzero = 0;
    for (const auto& s : corpus.slots) nonzero += static_cast<long>(s.entries.size());
    summary["nonzero_od_entries"] = nonzero;
    const double cells = static_cast<double>(corpus.slots.size()) * corpus.n() * corpus.n();
    summary["density"] = cells > 0 ? nonzero / cells : 0.0;
    write_text_file((fs::path(out_dir) / "ingest_summary.json").string(), summary.dump(2) + "\n");
    std::cout << "ingest: " << corpus.accepted << " orders into " << corpus_dir << " ("
              << corpus.skipped_parse << " malformed, " << corpus.skipped_bounds << " out of bounds)\n";
}

void cmd_train(const RunConfig& config, const std::string& corpus_dir, const std::string& out_dir) {
    config.validate();
    echo_config(config, out_dir);
    const Corpus corpus = load_corpus(corpus_dir);
    if (corpus.granularity_min != config.granularity_min)
        throw UserError("train: corpus granularity disagrees with config");
    TrainedRun run = train_on_corpus(config, corpus);
    save_checkpoint(run.params, (fs::path(out_dir) / "checkpoint.txt").string());
    write_loss_trace(run.result, (fs::path(out_dir) / "loss.csv").string());
    std::cout << "train: " << run.result.train_loss.size() << " epochs, best epoch " << run.result.best_epoch
              << ", final train loss " << run.result.train_loss.back() << "\n";
}

void cmd_evaluate(const RunConfig& config, const std::string& corpus_dir, const std::string& checkpoint_path,
                  const std::string& predictor, const std::string& out_dir) {
    config.validate();
    echo_config(config, out_dir);
    const Corpus corpus = load_corpus(corpus_dir);
    const SplitPlan plan = split(corpus.days);
    ForecastEngine engine(corpus, config.model, plan.train_end);
    const HistoryStats history = history_stats(corpus, plan.train_begin, plan.train_end);
    const auto targets = engine.targets_in_days(plan.test_begin, plan.test_end);
    if (targets.empty()) throw UserError("evaluate: no test targets with full history");

    Predictor pred;
    ModelParams params;  // keeps the model predictor's capture alive
    ARBaseline ar;
    if (predictor == "model") {
        if (checkpoint_path.empty()) throw UserError("evaluate: --checkpoint required for --predictor model");
        params = load_checkpoint(checkpoint_path);
        pred = model_predictor(engine, params);
    } else if (predictor == "ar") {
        ar = fit_ar_baseline(corpus, plan.train_begin, plan.train_end, config.ar_lag);
        pred = ar_predictor(corpus, ar, history);
    } else if (predictor == "havg") {
        pred = havg_predictor(history);
    } else {
        throw UserError("evaluate: unknown predictor '" + predictor + "' (model|ar|havg)");
    }

    const EvaluationResult result =
        evaluate(corpus, pred, targets, history, config.model.lambda_blend, config.fingerprint());
    write_metrics(result, (fs::path(out_dir) / "metrics.json").string());
    emit_series(corpus, pred, targets, (fs::path(out_dir) / "series.csv").string());
    std::cout << "evaluate(" << predictor << "): demand mape0 raw " << result.demand.raw.mape[0]
              << " blended " << result.demand.blended.mape[0] << "; od mape0 raw " << result.od.raw.mape[0]
              << " blended " << result.od.blended.mape[0] << "\n";
}

void cmd_predict(const RunConfig& config, const std::string& corpus_dir, const std::string& checkpoint_path,
                 int day, int slot, const std::string& out_dir) {
    config.validate();
    echo_config(config, out_dir);
    const Corpus corpus = load_corpus(corpus_dir);
    if (day < 0 || day >= corpus.days || slot < 0 || slot >= corpus.slots_per_day()) {
        std::ostringstream msg;
        msg << "predict: slot (day " << day << ", slot " << slot << ") outside corpus (days 0.."
            << corpus.days - 1 << ", slots 0.." << corpus.slots_per_day() - 1 << ")";
        throw UserError(msg.str());
    }
    const ModelParams params = load_checkpoint(checkpoint_path);
    const SplitPlan plan = split_or_all(corpus);
    ForecastEngine engine(corpus, config.model, plan.train_end);
    const HistoryStats history = history_stats(corpus, plan.train_begin, plan.train_end);
    const ForecastResult result = engine.predict(params, {day, slot}, history);
    write_forecast(result, out_dir);
    double total = 0.0;
    for (int i = 0; i < result.blended_demand.rows(); ++i) total += result.blended_demand.at(i, 0);
    std::cout << "predict: day " << day << " slot " << slot << " citywide blended demand " << total << "\n";
}

void cmd_ablate(const RunConfig& config, const std::string& corpus_dir, const std::string& out_dir) {
    config.validate();
    echo_config(config, out_dir);
    const Corpus corpus = load_corpus(corpus_dir);

    struct Variant {
        const char* name;
        bool linear, stpp, stpm, nonlinear;
    };
    const Variant variants[] = {
        {"full", true, true, true, true},           {"no-linear", false, true, true, true},
        {"no-stpp", true, false, true, true},       {"no-stpm", true, true, false, true},
        {"no-nonlinear", true, true, true, false},
    };

    std::ostringstream csv;
    csv << "variant,task,mape_0,mape_3,mape_5,mae_0,mae_3,mae_5\n";
    std::cout << "variant        task    mape_0    mae_0\n";
    char buf[200];
    for (const Variant& v : variants) {
        RunConfig variant_config = config;
        variant_config.model.temporal.linear = v.linear;
        variant_config.model.temporal.stpp = v.stpp;
        variant_config.model.temporal.stpm = v.stpm;
        variant_config.model.temporal.nonlinear = v.nonlinear;
        TrainedRun run = train_on_corpus(variant_config, corpus);
        const EvaluationResult result = evaluate_on_test(variant_config, corpus, run.params, run.plan);
        for (const MetricReport* report : {&result.demand, &result.od}) {
            const MetricBlock& b = report->blended;
            std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", v.name,
                          report->task.c_str(), b.mape[0], b.mape[1], b.mape[2], b.mae[0], b.mae[1], b.mae[2]);
            csv << buf;
            std::snprintf(buf, sizeof buf, "%-14s %-7s %8.4f %8.4f\n", v.name, report->task.c_str(),
                          b.mape[0], b.mae[0]);
            std::cout << buf;
        }
    }
    write_text_file((fs::path(out_dir) / "ablate.csv").string(), csv.str());
}

void cmd_sweep(const RunConfig& config, const std::string& orders_path, const std::string& param,
               const std::vector<double>& values, const std::string& out_dir) {
    config.validate();
    echo_config(config, out_dir);
    if (values.empty()) throw UserError("sweep: no values given");
    const ParseResult parsed = parse_orders(orders_path);

    std::ostringstream csv;
    csv << "param,value,task,mape_0,mape_3,mape_5,mae_0,mae_3,mae_5\n";
    char buf[200];
    for (double value : values) {
        RunConfig point = config;
        if (param == "granularity_min") {
            point.granularity_min = static_cast<int>(value);
            point.model.temporal.granularity_min = point.granularity_min;
            point.scenario.granularity_min = point.granularity_min;
        } else if (param == "n_days") {
            point.model.temporal.n_days = static_cast<int>(value);
        } else if (param == "h_hours") {
            point.model.temporal.h_hours = static_cast<int>(value);
        } else if (param == "cell_length_km") {
            point.grid.cell_length_km = value;
            point.scenario.grid = point.grid;
        } else {
            throw UserError("sweep: unknown parameter '" + param + "'");
        }
        point.validate();
        const Corpus corpus = build_od(parsed.records, point.grid, point.granularity_min);
        TrainedRun run = train_on_corpus(point, corpus);
        const EvaluationResult result = evaluate_on_test(point, corpus, run.params, run.plan);
        for (const MetricReport* report : {&result.demand, &result.od}) {
            const MetricBlock& b = report->blended;
            std::snprintf(buf, sizeof buf, "%s,%g,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", param.c_str(), value,
                          report->task.c_str(), b.mape[0], b.mape[1], b.mape[2], b.mae[0], b.mae[1],
                          b.mae[2]);
            csv << buf;
        }
        std::cout << "sweep " << param << "=" << value << ": demand mape0 "
                  << result.demand.blended.mape[0] << "\n";
    }
    write_text_file((fs::path(out_dir) / "sweep.csv").string(), csv.str());
}

int run_cli(int argc, char** argv) {
    CLI::App app{"odcast: attention-driven demand and origin-destination forecasting on gridded order logs"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "JSON configuration file")->required();
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed_override, "override the config seed");

    std::string orders_path, corpus_dir, checkpoint_path, predictor = "model", param;
    std::vector<double> values;
    int day = 0, slot = 0;

    auto* gen = app.add_subcommand("generate", "write a synthetic order log");
    auto* ing = app.add_subcommand("ingest", "parse an order log into a corpus");
    ing->add_option("--orders", orders_path, "orders CSV")->required();
    auto* tr = app.add_subcommand("train", "train the model on a corpus");
    tr->add_option("--corpus", corpus_dir, "corpus directory")->required();
    auto* ev = app.add_subcommand("evaluate", "score a predictor on the test split");
    ev->add_option("--corpus", corpus_dir, "corpus directory")->required();
    ev->add_option("--checkpoint", checkpoint_path, "trained checkpoint");
    ev->add_option("--predictor", predictor, "model|ar|havg");
    auto* pr = app.add_subcommand("predict", "forecast one slot");
    pr->add_option("--corpus", corpus_dir, "corpus directory")->required();
    pr->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    pr->add_option("--day", day, "target day")->required();
    pr->add_option("--slot", slot, "target slot")->required();
    auto* ab = app.add_subcommand("ablate", "train the full model and channel-removed variants");
    ab->add_option("--corpus", corpus_dir, "corpus directory")->required();
    auto* sw = app.add_subcommand("sweep", "retrain across one parameter");
    sw->add_option("--orders", orders_path, "orders CSV")->required();
    sw->add_option("--param", param, "granularity_min|n_days|h_hours|cell_length_km")->required();
    sw->add_option("--values", values, "values to sweep")->required();

    try {
        app.parse(argc, argv);
        seed_given = seed_opt->count() > 0;
        RunConfig config = RunConfig::from_file(config_path);
        if (seed_given) {
            config.seed = seed_override;
            config.scenario.seed = seed_override;
            config.train.seed = seed_override;
        }
        if (gen->parsed()) cmd_generate(config, out_dir);
        if (ing->parsed()) cmd_ingest(config, orders_path, out_dir);
        if (tr->parsed()) cmd_train(config, corpus_dir, out_dir);
        if (ev->parsed()) cmd_evaluate(config, corpus_dir, checkpoint_path, predictor, out_dir);
        if (pr->parsed()) cmd_predict(config, corpus_dir, checkpoint_path, day, slot, out_dir);
        if (ab->parsed()) cmd_ablate(config, corpus_dir, out_dir);
        if (sw->parsed()) cmd_sweep(config, orders_path, param, values, out_dir);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace odcast
