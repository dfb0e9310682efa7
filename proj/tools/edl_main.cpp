#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edl/checkpoint.hpp"
#include "edl/data.hpp"
#include "edl/errors.hpp"
#include "edl/gradcheck.hpp"
#include "edl/metrics.hpp"
#include "edl/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CliOptions {
    // data
    std::string synth;
    std::string data_images, data_labels;
    std::string classes;
    // ood data (eval)
    std::string ood_synth;
    std::string ood_images, ood_labels;
    // model / training
    std::string backbone = "mlp:128";
    std::string mode;
    std::string base;
    std::string ckpt, ckpt_a, ckpt_b;
    int epochs = -1;     // -1: per-mode default
    double lr = -1.0;    // -1: per-mode default
    int batch = 64;
    std::string act;     // empty: per-mode default
    double kappa = 0.01;
    double anneal_horizon = 10.0;
    std::string risk_matrix;
    std::string head_init = "zero";
    std::uint64_t seed = 0;
    std::string out;
    std::string config;
    // eval / sweep
    bool per_sample_csv = false;
    int image_index = 0;
    double angle_max = 180.0;
    double angle_step = 10.0;
};

std::vector<int> parse_class_list(const std::string& spec) {
    std::vector<int> classes;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto dash = tok.find('-');
        try {
            if (dash == std::string::npos) {
                classes.push_back(std::stoi(tok));
            } else {
                const int lo = std::stoi(tok.substr(0, dash));
                const int hi = std::stoi(tok.substr(dash + 1));
                if (hi < lo) throw std::invalid_argument(tok);
                for (int c = lo; c <= hi; ++c) classes.push_back(c);
            }
        } catch (const std::exception&) {
            throw edl::ConfigError("--classes: cannot parse '" + tok + "' (use e.g. 0-4 or 1,3,5)");
        }
    }
    if (classes.empty()) throw edl::ConfigError("--classes: empty class list");
    return classes;
}

edl::Dataset load_dataset(const CliOptions& o) {
    edl::Dataset data;
    if (!o.synth.empty()) {
        if (!o.data_images.empty()) {
            throw edl::ConfigError("give either --synth or --data-images, not both");
        }
        data = edl::synth(edl::SyntheticSpec::parse(o.synth));
    } else if (!o.data_images.empty() || !o.data_labels.empty()) {
        if (o.data_images.empty() || o.data_labels.empty()) {
            throw edl::ConfigError("--data-images and --data-labels must be given together");
        }
        data = edl::load_idx(o.data_images, o.data_labels);
    } else {
        throw edl::ConfigError("no dataset: give --synth or --data-images/--data-labels");
    }
    if (!o.classes.empty()) {
        data = edl::filter_classes(data, parse_class_list(o.classes));
    }
    return data;
}

std::optional<edl::Dataset> load_ood(const CliOptions& o) {
    if (!o.ood_synth.empty()) {
        return edl::synth(edl::SyntheticSpec::parse(o.ood_synth));
    }
    if (!o.ood_images.empty() || !o.ood_labels.empty()) {
        if (o.ood_images.empty() || o.ood_labels.empty()) {
            throw edl::ConfigError("--ood-images and --ood-labels must be given together");
        }
        return edl::load_idx(o.ood_images, o.ood_labels);
    }
    return std::nullopt;
}

edl::RiskMatrix load_risk_matrix(const std::string& spec, int k_hint) {
    if (spec == "mnist") return edl::mnist_risk_matrix(k_hint > 0 ? k_hint : 10);
    if (spec == "grouped") return edl::cifar_grouped_risk_matrix();
    return edl::RiskMatrix::load_csv(spec);
}

// restrict a global-id cost table to a model's label subset
edl::RiskMatrix slice_risk_matrix(const edl::RiskMatrix& r, const std::vector<int>& label_ids) {
    const int k = static_cast<int>(label_ids.size());
    std::vector<double> costs(static_cast<std::size_t>(k) * static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
            if (label_ids[static_cast<std::size_t>(a)] >= r.k() ||
                label_ids[static_cast<std::size_t>(b)] >= r.k()) {
                throw edl::ConfigError("risk matrix is " + std::to_string(r.k()) + "x" +
                                       std::to_string(r.k()) + " but the data uses class id " +
                                       std::to_string(std::max(label_ids[static_cast<std::size_t>(a)],
                                                               label_ids[static_cast<std::size_t>(b)])));
            }
            costs[static_cast<std::size_t>(a * k + b)] =
                r.cost(label_ids[static_cast<std::size_t>(a)], label_ids[static_cast<std::size_t>(b)]);
        }
    }
    return edl::RiskMatrix(k, std::move(costs));
}

std::filesystem::path ensure_out_dir(const std::string& out) {
    if (out.empty()) throw edl::ConfigError("--out is required");
    std::filesystem::path dir(out);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw edl::DataError("cannot open '" + path.string() + "' for writing");
    f << text;
}

int cmd_train(const CliOptions& o) {
    const edl::TrainMode mode = edl::mode_from_string(o.mode);
    const edl::Dataset data = load_dataset(o);
    const auto out_dir = ensure_out_dir(o.out);

    const bool has_base = !o.base.empty();
    const bool finetune = mode == edl::TrainMode::Edl && has_base;
    const bool head_mode = mode == edl::TrainMode::EdlP || mode == edl::TrainMode::EdlPg;
    if (head_mode && !has_base) {
        throw edl::ConfigError("--mode " + o.mode + " needs --base (a trained evidential checkpoint)");
    }
    if (mode == edl::TrainMode::Softmax && has_base) {
        throw edl::ConfigError("--mode softmax trains from scratch; --base is not accepted");
    }

    edl::TrainOptions opts;
    opts.batch_size = o.batch;
    opts.seed = o.seed;
    opts.anneal_horizon = o.anneal_horizon;
    opts.kappa = o.kappa;
    if (o.head_init == "zero") {
        opts.head_init = edl::HeadInit::Zero;
    } else if (o.head_init == "gauss") {
        opts.head_init = edl::HeadInit::Gaussian;
    } else {
        throw edl::ConfigError("--head-init must be zero or gauss");
    }
    // per-mode defaults
    if (finetune) {
        opts.epochs = o.epochs < 0 ? 10 : o.epochs;
        opts.lr = o.lr < 0 ? 1e-5 : o.lr;
        opts.act = edl::activation_from_string(o.act.empty() ? "clamped-exp" : o.act);
    } else if (head_mode) {
        opts.epochs = o.epochs < 0 ? 50 : o.epochs;
        opts.lr = o.lr < 0 ? 1e-3 : o.lr;
        opts.act = edl::activation_from_string(o.act.empty() ? "softplus" : o.act);
    } else {
        opts.epochs = o.epochs < 0 ? 20 : o.epochs;
        opts.lr = o.lr < 0 ? 1e-3 : o.lr;
        opts.act = edl::activation_from_string(o.act.empty() ? "softplus" : o.act);
    }

    edl::EvidenceModel model = [&] {
        if (has_base) {
            edl::EvidenceModel loaded = edl::load_checkpoint(o.base);
            if (loaded.labels != data.label_ids) {
                throw edl::ConfigError("--base checkpoint was trained on different classes "
                                       "than the given dataset");
            }
            return loaded;
        }
        return edl::make_model(edl::BackboneSpec::parse(o.backbone), data, opts.act, o.seed);
    }();

    std::optional<edl::RiskMatrix> risk_local;
    if (!o.risk_matrix.empty()) {
        const edl::RiskMatrix global = load_risk_matrix(o.risk_matrix, 0);
        risk_local = slice_risk_matrix(global, data.label_ids);
        opts.log_costs = &*risk_local;
    }

    edl::TrainLog log;
    switch (mode) {
        case edl::TrainMode::Softmax:
            log = edl::pretrain_softmax(model, data, opts);
            break;
        case edl::TrainMode::Edl:
            log = finetune ? edl::finetune_edl(model, data, opts)
                           : edl::train_edl(model, data, opts);
            break;
        default:
            if (!risk_local) {
                throw edl::ConfigError("--mode " + o.mode +
                                       " needs --risk-matrix (mnist|grouped|<csv>)");
            }
            log = edl::train_risk(model, data, *risk_local, mode, opts);
            break;
    }

    edl::save_checkpoint(model, (out_dir / "checkpoint.bin").string());
    std::ostringstream csv;
    edl::write_train_log_csv(log, csv);
    write_file(out_dir / "train_log.csv", csv.str());
    std::cout << "trained mode=" << edl::to_string(model.mode) << " epochs=" << opts.epochs
              << " -> " << (out_dir / "checkpoint.bin").string() << "\n";
    return kExitOk;
}

int cmd_eval(const CliOptions& o) {
    if (o.ckpt.empty()) throw edl::ConfigError("--ckpt is required");
    const edl::EvidenceModel model = edl::load_checkpoint(o.ckpt);
    const edl::Dataset data = load_dataset(o);
    const std::optional<edl::Dataset> ood = load_ood(o);
    std::optional<edl::RiskMatrix> risk;
    if (!o.risk_matrix.empty()) risk = load_risk_matrix(o.risk_matrix, 0);

    const edl::EvalReport report = edl::evaluate(model, data, risk ? &*risk : nullptr,
                                                 ood ? &*ood : nullptr);
    const auto out_dir = ensure_out_dir(o.out);
    write_file(out_dir / "report.json", report.to_json() + "\n");
    if (o.per_sample_csv) {
        std::ostringstream csv;
        report.write_records_csv(csv);
        write_file(out_dir / "records.csv", csv.str());
    }
    std::cout << report.to_json() << "\n";
    return kExitOk;
}

int cmd_fuse(const CliOptions& o) {
    if (o.ckpt_a.empty() || o.ckpt_b.empty()) {
        throw edl::ConfigError("--ckpt-a and --ckpt-b are required");
    }
    const edl::EvidenceModel a = edl::load_checkpoint(o.ckpt_a);
    const edl::EvidenceModel b = edl::load_checkpoint(o.ckpt_b);
    const edl::Dataset data = load_dataset(o);
    const edl::EvalReport report = edl::evaluate_fused(a, b, data, nullptr);
    const auto out_dir = ensure_out_dir(o.out);
    write_file(out_dir / "report.json", report.to_json() + "\n");
    std::cout << report.to_json() << "\n";
    return kExitOk;
}

int cmd_rotate_sweep(const CliOptions& o) {
    if (o.ckpt.empty()) throw edl::ConfigError("--ckpt is required");
    const edl::EvidenceModel model = edl::load_checkpoint(o.ckpt);
    const edl::Dataset data = load_dataset(o);
    if (!data.is_image()) throw edl::ConfigError("rotate-sweep needs image data");
    if (o.image_index < 0 || o.image_index >= data.n()) {
        throw edl::ConfigError("--image-index " + std::to_string(o.image_index) +
                               " outside the dataset (n=" + std::to_string(data.n()) + ")");
    }
    if (o.angle_step <= 0.0) throw edl::ConfigError("--angle-step must be positive");

    const auto sample = data.sample(o.image_index);
    const edl::Tensor image =
        edl::Tensor::from(data.sample_shape, {sample.begin(), sample.end()});
    std::ostringstream csv;
    csv << "angle";
    for (int k = 0; k < model.k(); ++k) csv << ",p" << model.labels[static_cast<std::size_t>(k)];
    csv << ",entropy\n";
    char buf[64];
    for (double angle = 0.0; angle <= o.angle_max + 1e-9; angle += o.angle_step) {
        const edl::Tensor rotated = edl::rotate(image, angle);
        const edl::Tensor x = edl::Tensor::from(
            {1, data.flat_dim()}, {rotated.values().begin(), rotated.values().end()});
        const edl::Tensor probs = model.predictive(x);
        double entropy = 0.0;
        csv << angle;
        for (double p : probs.values()) {
            std::snprintf(buf, sizeof(buf), "%.17g", p);
            csv << ',' << buf;
            if (p > 0.0) entropy -= p * std::log(p);
        }
        std::snprintf(buf, sizeof(buf), "%.17g", entropy);
        csv << ',' << buf << "\n";
    }
    const auto out_dir = ensure_out_dir(o.out);
    write_file(out_dir / "sweep.csv", csv.str());
    std::cout << "sweep written to " << (out_dir / "sweep.csv").string() << "\n";
    return kExitOk;
}

int cmd_gradcheck() {
    const auto results = edl::run_gradchecks(100);
    bool all_pass = true;
    for (const auto& res : results) {
        std::cout << (res.pass ? "ok   " : "FAIL ") << res.name
                  << " max_rel_err=" << res.max_rel_err << "\n";
        all_pass = all_pass && res.pass;
    }
    std::cout << (all_pass ? "gradcheck passed" : "gradcheck FAILED") << " ("
              << results.size() << " operators)\n";
    return all_pass ? kExitOk : kExitNumerical;
}

void add_data_options(CLI::App* cmd, CliOptions& o) {
    cmd->add_option("--synth", o.synth,
                    "synthetic dataset, e.g. blobs:K=3,n=200,sigma=0.1 | moons:... | "
                    "digits:n=1000,sigma=1.0 | noise:... | blobs-ood:...");
    cmd->add_option("--data-images", o.data_images, "IDX images file");
    cmd->add_option("--data-labels", o.data_labels, "IDX labels file");
    cmd->add_option("--classes", o.classes, "keep only these classes, e.g. 0-4 or 1,3,5");
}

void add_config_option(CLI::App* cmd, CliOptions& o) {
    cmd->add_option("--config", o.config, "JSON config file; explicit flags override it");
}

void add_train_options(CLI::App* cmd, CliOptions& o, bool with_mode) {
    add_data_options(cmd, o);
    add_config_option(cmd, o);
    if (with_mode) {
        cmd->add_option("--mode", o.mode, "softmax|edl|risk-edl|edl-p|edl-pg")->required();
    }
    cmd->add_option("--backbone", o.backbone, "mlp:<w1,w2,...> or cnn:w=<factor>");
    cmd->add_option("--base", o.base, "checkpoint to continue from");
    cmd->add_option("--epochs", o.epochs, "training epochs (per-mode default)");
    cmd->add_option("--lr", o.lr, "learning rate (per-mode default)");
    cmd->add_option("--batch", o.batch, "minibatch size");
    cmd->add_option("--act", o.act, "relu|softplus|exp|clamped-exp");
    cmd->add_option("--kappa", o.kappa, "risk penalty weight (risk-edl)");
    cmd->add_option("--anneal-T", o.anneal_horizon, "KL annealing horizon in epochs");
    cmd->add_option("--risk-matrix", o.risk_matrix, "mnist|grouped|<csv path>");
    cmd->add_option("--head-init", o.head_init, "pignistic head init: zero|gauss");
    cmd->add_option("--seed", o.seed, "random seed (mandatory)")->required();
    cmd->add_option("--out", o.out, "output directory")->required();
}

// last occurrence wins, so flags injected from --config can be overridden
void take_last_everywhere(CLI::App* cmd) {
    for (CLI::Option* opt : cmd->get_options()) {
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
}

std::vector<std::string> inject_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    if (args.size() < 2 || args[1].rfind('-', 0) == 0) return args;
    std::string config_path;
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw edl::DataError("cannot open config file '" + config_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw edl::DataError("config '" + config_path + "': " + e.what());
    }
    if (!j.is_object()) throw edl::DataError("config '" + config_path + "' must be a JSON object");

    std::vector<std::string> merged{args[0], args[1]};
    for (const auto& [key, value] : j.items()) {
        if (key == "config") continue;
        if (value.is_boolean()) {
            merged.push_back("--" + key + (value.get<bool>() ? "=true" : "=false"));
        } else if (value.is_string()) {
            merged.push_back("--" + key);
            merged.push_back(value.get<std::string>());
        } else {
            merged.push_back("--" + key);
            merged.push_back(value.dump());
        }
    }
    merged.insert(merged.end(), args.begin() + 2, args.end());
    return merged;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evidential classification toolkit"};
    app.require_subcommand(1);
    CliOptions o;

    CLI::App* train = app.add_subcommand("train", "train a model (--mode selects the objective)");
    add_train_options(train, o, true);

    CLI::App* pretrain = app.add_subcommand("pretrain", "cross-entropy pretraining");
    add_train_options(pretrain, o, false);
    pretrain->callback([&o] { o.mode = "softmax"; });

    CLI::App* train_edl_cmd = app.add_subcommand("train-edl",
                                                 "evidential training from scratch "
                                                 "(or fine-tuning with --base)");
    add_train_options(train_edl_cmd, o, false);
    train_edl_cmd->callback([&o] { o.mode = "edl"; });

    CLI::App* finetune = app.add_subcommand("finetune",
                                            "fine-tune a softmax checkpoint with the "
                                            "evidential loss");
    add_train_options(finetune, o, false);
    finetune->get_option("--base")->required();
    finetune->callback([&o] { o.mode = "edl"; });

    CLI::App* train_risk_cmd = app.add_subcommand("train-risk", "risk-aware training phases");
    add_train_options(train_risk_cmd, o, true);
    train_risk_cmd->get_option("--mode")->check(
        CLI::IsMember({"risk-edl", "edl-p", "edl-pg"}));

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_data_options(eval, o);
    add_config_option(eval, o);
    eval->add_option("--ckpt", o.ckpt, "checkpoint to evaluate")->required();
    eval->add_option("--risk-matrix", o.risk_matrix, "mnist|grouped|<csv path>");
    eval->add_option("--ood-synth", o.ood_synth, "synthetic out-of-distribution set");
    eval->add_option("--ood-images", o.ood_images, "IDX images for the OoD set");
    eval->add_option("--ood-labels", o.ood_labels, "IDX labels for the OoD set");
    eval->add_flag("--per-sample-csv", o.per_sample_csv, "also write records.csv");
    eval->add_option("--out", o.out, "output directory")->required();

    CLI::App* fuse = app.add_subcommand("fuse", "fuse two checkpoints over disjoint classes");
    add_data_options(fuse, o);
    add_config_option(fuse, o);
    fuse->add_option("--ckpt-a", o.ckpt_a, "first checkpoint")->required();
    fuse->add_option("--ckpt-b", o.ckpt_b, "second checkpoint")->required();
    fuse->add_option("--out", o.out, "output directory")->required();

    CLI::App* sweep = app.add_subcommand("rotate-sweep",
                                         "classify one test image under rotation");
    add_data_options(sweep, o);
    add_config_option(sweep, o);
    sweep->add_option("--ckpt", o.ckpt, "checkpoint")->required();
    sweep->add_option("--image-index", o.image_index, "which test image");
    sweep->add_option("--angle-max", o.angle_max, "largest angle in degrees");
    sweep->add_option("--angle-step", o.angle_step, "angle grid step in degrees");
    sweep->add_option("--out", o.out, "output directory")->required();

    app.add_subcommand("gradcheck", "finite-difference check of every operator");

    for (CLI::App* cmd : app.get_subcommands({})) take_last_everywhere(cmd);

    try {
        const auto args = inject_config_args(argc, argv);
        std::vector<const char*> argv2;
        argv2.reserve(args.size());
        for (const auto& a : args) argv2.push_back(a.c_str());
        app.parse(static_cast<int>(argv2.size()), argv2.data());

        if (train->parsed() || pretrain->parsed() || train_edl_cmd->parsed() ||
            finetune->parsed() || train_risk_cmd->parsed()) {
            return cmd_train(o);
        }
        if (eval->parsed()) return cmd_eval(o);
        if (fuse->parsed()) return cmd_fuse(o);
        if (sweep->parsed()) return cmd_rotate_sweep(o);
        return cmd_gradcheck();
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const edl::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const edl::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const edl::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const edl::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
