#include "commands.hpp"

#include "arml/attack.hpp"
#include "arml/certify.hpp"
#include "arml/dataset.hpp"
#include "arml/knn.hpp"
#include "arml/metric.hpp"
#include "arml/parallel.hpp"
#include "arml/trainer.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace arml::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sha256_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 initialization failed");
    }
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &length);
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

/// Collects the resolved flags of a subcommand and the checksums of its inputs.
class Manifest {
public:
    explicit Manifest(const CLI::App &command) : command_(command), start_(std::chrono::steady_clock::now()) {}

    void add_input(const fs::path &path) {
        if (!path.empty()) inputs_[path.string()] = sha256_file(path);
    }
    void set(const std::string &key, json value) { extra_[key] = std::move(value); }

    void write(const fs::path &path, std::uint64_t seed) const {
        json doc;
        doc["command"] = command_.get_name();
        json flags = json::object();
        for (const CLI::Option *opt : command_.get_options()) {
            const std::string name = opt->get_single_name();
            if (name.empty() || name == "help") continue;
            if (opt->count() > 0) {
                const auto &results = opt->results();
                std::string joined;
                for (std::size_t i = 0; i < results.size(); ++i) joined += (i ? "," : "") + results[i];
                flags[name] = joined;
            } else {
                flags[name] = opt->get_default_str();
            }
        }
        doc["flags"] = flags;
        doc["datasets"] = inputs_;
        doc["seed"] = seed;
        for (const auto &[key, value] : extra_.items()) doc[key] = value;
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
        doc["wall_time_seconds"] = elapsed.count();
        std::ofstream out(path);
        if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
        out << doc.dump(2) << '\n';
    }

private:
    const CLI::App &command_;
    std::chrono::steady_clock::time_point start_;
    std::map<std::string, std::string> inputs_;
    json extra_ = json::object();
};

fs::path manifest_path(const std::string &flag, const fs::path &output) {
    if (!flag.empty()) return flag;
    if (output.empty()) return {};
    return fs::path(output.string() + ".manifest.json");
}

/// Reads a train/test pair with a shared label mapping and feature dimension.
std::pair<std::shared_ptr<const Dataset>, std::shared_ptr<const Dataset>> load_pair(const fs::path &train_path,
                                                                                     const fs::path &test_path) {
    auto train = std::make_shared<const Dataset>(read_libsvm(train_path));
    if (test_path.empty()) return {train, nullptr};
    ParseOptions options;
    options.dim_hint = train->dim();
    options.label_values = train->label_values();
    auto test = std::make_shared<const Dataset>(read_libsvm(test_path, options));
    if (test->dim() > train->dim()) {
        ParseOptions widen;
        widen.dim_hint = test->dim();
        train = std::make_shared<const Dataset>(read_libsvm(train_path, widen));
    }
    return {train, test};
}

MetricFactor load_or_identity(const std::string &path, Index dim) {
    if (path.empty()) return MetricFactor::identity(dim);
    MetricFactor metric = load_metric(fs::path(path));
    if (metric.dim() != dim) {
        throw std::runtime_error(fmt::format("metric has dimension {} but the data has {}", metric.dim(), dim));
    }
    return metric;
}

struct Radii {
    std::vector<double> values;
    std::vector<std::string> labels;
};

Radii parse_radii(const std::string &text) {
    Radii radii;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        const auto first = token.find_first_not_of(" \t");
        const auto last = token.find_last_not_of(" \t");
        if (first == std::string::npos) throw UsageError("empty radius in --radii");
        token = token.substr(first, last - first + 1);
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(token, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (used != token.size()) throw UsageError(fmt::format("invalid radius '{}'", token));
        radii.values.push_back(value);
        radii.labels.push_back(token);
    }
    if (radii.values.empty()) throw UsageError("--radii needs at least one value");
    return radii;
}

std::shared_ptr<const Dataset> maybe_sample(std::shared_ptr<const Dataset> test, Index sample, std::uint64_t seed,
                                            std::ostream &err) {
    if (sample <= 0) return test;
    if (sample >= test->size()) {
        if (sample > test->size()) {
            err << fmt::format("note: --sample {} exceeds the {} test instances; using all\n", sample, test->size());
        }
        return test;
    }
    return std::make_shared<const Dataset>(sample_subset(*test, sample, seed));
}

void emit_csv(const std::string &out_path, std::ostream &out, const RobustErrorCurve &curve, const Radii &radii) {
    if (out_path.empty()) {
        write_curve_csv(out, curve, radii.labels);
        return;
    }
    std::ofstream file(out_path);
    if (!file) throw std::runtime_error(fmt::format("cannot write {}", out_path));
    write_curve_csv(file, curve, radii.labels);
}

struct CommonModelFlags {
    std::string train;
    std::string test;
    std::string metric;
    int k = 1;
    int threads = 0;
};

void add_model_flags(CLI::App &sub, CommonModelFlags &flags, bool need_test) {
    sub.add_option("--train", flags.train, "training set (LIBSVM)")->required()->check(CLI::ExistingFile);
    auto *test = sub.add_option("--test", flags.test, "test set (LIBSVM)")->check(CLI::ExistingFile);
    if (need_test) test->required();
    sub.add_option("--metric", flags.metric, "metric file; Euclidean when omitted")->check(CLI::ExistingFile);
    sub.add_option("--k", flags.k, "number of neighbors (odd)")->capture_default_str();
    sub.add_option("--threads", flags.threads, "worker threads; ARML_THREADS or all cores when 0")
        ->capture_default_str();
}

}  // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Provably robust Mahalanobis metric learning for K-NN"};
    app.name("arml");
    app.require_subcommand(1);

    // train
    auto *train_cmd = app.add_subcommand("train", "learn a robust Mahalanobis metric");
    std::string train_data, train_out, train_log, train_manifest;
    std::string loss_name = "negative", objective_name = "sampled";
    TrainConfig config;
    int train_threads = 0;
    train_cmd->add_option("--data", train_data, "training set (LIBSVM)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_out, "metric file to write")->required();
    train_cmd->add_option("--loss", loss_name, "negative, hinge, exponential or logistic")->capture_default_str();
    train_cmd->add_option("--epochs", config.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--neighborhood", config.neighborhood)->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", config.lr)->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", config.seed)->capture_default_str();
    train_cmd->add_option("--factor-rows", config.factor_rows, "rows of G; 0 means D")->capture_default_str();
    train_cmd->add_option("--objective", objective_name, "sampled or exact-kth")->capture_default_str();
    train_cmd->add_option("--k", config.k, "K of the exact-kth objective")->capture_default_str();
    train_cmd->add_option("--threads", train_threads)->capture_default_str();
    train_cmd->add_option("--log", train_log, "loss log; loss.csv next to --out by default");
    train_cmd->add_option("--manifest", train_manifest, "run manifest; <out>.manifest.json by default");

    // certify
    auto *certify_cmd = app.add_subcommand("certify", "certified robust-error curve");
    CommonModelFlags certify_flags;
    std::string certify_mode = "theorem1", certify_radii = "0", certify_out, certify_manifest;
    Index certify_sample = 0;
    std::uint64_t certify_seed = 0;
    add_model_flags(*certify_cmd, certify_flags, true);
    certify_cmd->add_option("--mode", certify_mode, "theorem1 or exact")->capture_default_str();
    certify_cmd->add_option("--radii", certify_radii, "comma-separated ascending radii")->capture_default_str();
    certify_cmd->add_option("--sample", certify_sample, "test instances to sample; 0 means all")
        ->capture_default_str();
    certify_cmd->add_option("--seed", certify_seed)->capture_default_str();
    certify_cmd->add_option("--out", certify_out, "CSV path; stdout when omitted");
    certify_cmd->add_option("--manifest", certify_manifest);

    // attack
    auto *attack_cmd = app.add_subcommand("attack", "empirical robust-error curve from the boundary attack");
    CommonModelFlags attack_flags;
    std::string attack_radii = "0", attack_out, attack_manifest;
    Index attack_sample = 0;
    std::uint64_t attack_seed = 0;
    AttackOptions attack_options;
    add_model_flags(*attack_cmd, attack_flags, true);
    attack_cmd->add_option("--radii", attack_radii)->capture_default_str();
    attack_cmd->add_option("--steps", attack_options.steps)->capture_default_str()->check(CLI::NonNegativeNumber);
    attack_cmd->add_option("--sample", attack_sample)->capture_default_str();
    attack_cmd->add_option("--seed", attack_seed)->capture_default_str();
    attack_cmd->add_option("--out", attack_out);
    attack_cmd->add_option("--manifest", attack_manifest);

    // eval
    auto *eval_cmd = app.add_subcommand("eval", "clean error of the K-NN model");
    CommonModelFlags eval_flags;
    bool eval_loo = false;
    add_model_flags(*eval_cmd, eval_flags, false);
    eval_cmd->add_flag("--leave-one-out", eval_loo, "evaluate on the training set excluding each instance");

    // boundary-grid
    auto *grid_cmd = app.add_subcommand("boundary-grid", "predictions on a grid over a 2-D bounding box");
    CommonModelFlags grid_flags;
    int grid_size = 100;
    double grid_margin = 0.1;
    std::string grid_out;
    add_model_flags(*grid_cmd, grid_flags, false);
    grid_cmd->add_option("--grid", grid_size, "cells per axis")->capture_default_str()->check(CLI::Range(2, 100000));
    grid_cmd->add_option("--margin", grid_margin, "box padding as a fraction of the data range")
        ->capture_default_str();
    grid_cmd->add_option("--out", grid_out, "CSV path; stdout when omitted");

    // scale
    auto *scale_cmd = app.add_subcommand("scale", "min-max scale a train/test pair with training statistics");
    std::string scale_train, scale_test, scale_train_out, scale_test_out;
    double scale_lower = 0.0, scale_upper = 1.0;
    scale_cmd->add_option("--train", scale_train)->required()->check(CLI::ExistingFile);
    scale_cmd->add_option("--test", scale_test)->check(CLI::ExistingFile);
    scale_cmd->add_option("--train-out", scale_train_out)->required();
    scale_cmd->add_option("--test-out", scale_test_out);
    scale_cmd->add_option("--lower", scale_lower)->capture_default_str();
    scale_cmd->add_option("--upper", scale_upper)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train_cmd) {
            Manifest manifest(*train_cmd);
            config.loss = parse_loss(loss_name);
            config.objective = parse_objective(objective_name);
            config.threads = resolve_threads(train_threads);
            manifest.add_input(train_data);
            const Dataset data = read_libsvm(train_data);
            const fs::path metric_path = train_out;
            const fs::path log_path =
                train_log.empty() ? metric_path.parent_path() / "loss.csv" : fs::path(train_log);
            std::ofstream log(log_path);
            if (!log) throw std::runtime_error(fmt::format("cannot write {}", log_path.string()));
            log << "epoch,loss\n";
            const MetricFactor metric = train(data, config, [&](const EpochReport &report) {
                log << fmt::format("{},{:.17g}\n", report.epoch, report.loss);
            });
            save_metric(metric_path, metric);
            manifest.set("threads", config.threads);
            manifest.set("outputs", json::array({metric_path.string(), log_path.string()}));
            manifest.write(manifest_path(train_manifest, metric_path), config.seed);
            return 0;
        }

        if (*certify_cmd || *attack_cmd) {
            const bool certifying = certify_cmd->parsed();
            const CommonModelFlags &flags = certifying ? certify_flags : attack_flags;
            const Radii radii = parse_radii(certifying ? certify_radii : attack_radii);
            CertifyMode mode = CertifyMode::theorem1;
            if (certifying) {
                if (certify_mode == "exact") {
                    mode = CertifyMode::exact1nn;
                } else if (certify_mode != "theorem1") {
                    throw UsageError(fmt::format("unknown --mode '{}'", certify_mode));
                }
                if (mode == CertifyMode::exact1nn && flags.k != 1) throw UsageError("--mode exact requires --k 1");
            }
            Manifest manifest(certifying ? *certify_cmd : *attack_cmd);
            manifest.add_input(flags.train);
            manifest.add_input(flags.test);
            if (!flags.metric.empty()) manifest.add_input(flags.metric);
            auto [train_set, test_set] = load_pair(flags.train, flags.test);
            const std::uint64_t seed = certifying ? certify_seed : attack_seed;
            test_set = maybe_sample(test_set, certifying ? certify_sample : attack_sample, seed, err);
            const KnnModel model(train_set, load_or_identity(flags.metric, train_set->dim()), flags.k);
            const int threads = resolve_threads(flags.threads);
            const RobustErrorCurve curve =
                certifying ? certified_curve(model, *test_set, radii.values, mode, threads)
                           : empirical_curve(model, *test_set, radii.values, seed, attack_options, threads);
            const std::string &out_path = certifying ? certify_out : attack_out;
            emit_csv(out_path, out, curve, radii);
            manifest.set("threads", threads);
            manifest.set("test_instances", test_set->size());
            const fs::path mpath = manifest_path(certifying ? certify_manifest : attack_manifest, out_path);
            if (!mpath.empty()) manifest.write(mpath, seed);
            return 0;
        }

        if (*eval_cmd) {
            if (eval_flags.test.empty() && !eval_loo) throw UsageError("eval needs --test or --leave-one-out");
            auto [train_set, test_set] = load_pair(eval_flags.train, eval_loo ? std::string() : eval_flags.test);
            const KnnModel model(train_set, load_or_identity(eval_flags.metric, train_set->dim()), eval_flags.k);
            const int threads = resolve_threads(eval_flags.threads);
            const double error =
                eval_loo ? clean_error(model, *train_set, true, threads) : clean_error(model, *test_set, false, threads);
            out << fmt::format("clean_error,{:.6f}\n", error);
            return 0;
        }

        if (*grid_cmd) {
            auto [train_set, unused] = load_pair(grid_flags.train, {});
            if (train_set->dim() != 2) {
                throw UsageError(fmt::format("boundary-grid needs 2-D data, got D = {}", train_set->dim()));
            }
            const KnnModel model(train_set, load_or_identity(grid_flags.metric, 2), grid_flags.k);
            const Matrix &x = train_set->features();
            Vector lo = x.colwise().minCoeff().transpose();
            Vector hi = x.colwise().maxCoeff().transpose();
            const Vector pad = ((hi - lo) * grid_margin).cwiseMax(grid_margin);
            lo -= pad;
            hi += pad;
            std::ofstream file;
            if (!grid_out.empty()) {
                file.open(grid_out);
                if (!file) throw std::runtime_error(fmt::format("cannot write {}", grid_out));
            }
            std::ostream &sink = grid_out.empty() ? out : file;
            sink << "x1,x2,predicted_class\n";
            Vector point(2);
            for (int a = 0; a < grid_size; ++a) {
                point(0) = lo(0) + (hi(0) - lo(0)) * a / (grid_size - 1);
                for (int b = 0; b < grid_size; ++b) {
                    point(1) = lo(1) + (hi(1) - lo(1)) * b / (grid_size - 1);
                    const int label = model.predict(point);
                    sink << fmt::format("{:.17g},{:.17g},{}\n", point(0), point(1),
                                        train_set->label_values()[static_cast<std::size_t>(label)]);
                }
            }
            return 0;
        }

        if (*scale_cmd) {
            if (scale_test.empty() != scale_test_out.empty()) {
                throw UsageError("--test and --test-out must be given together");
            }
            auto [train_set, test_set] = load_pair(scale_train, scale_test);
            MinMaxScaler scaler(scale_lower, scale_upper);
            scaler.fit(*train_set);
            write_libsvm(fs::path(scale_train_out), scaler.transform(*train_set));
            if (test_set) write_libsvm(fs::path(scale_test_out), scaler.transform(*test_set));
            return 0;
        }
    } catch (const UsageError &e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace arml::cli
