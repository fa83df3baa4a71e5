#include "cli.hpp"

#include <toxedge/toxedge.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace toxedge::cli {
namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string join_tokens(const std::vector<int>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(tokens[i]);
    }
    return s;
}

void print_metrics(std::ostream& out, const Metrics& m) {
    out << "  accuracy          " << fmt("%.4f", m.accuracy) << "\n"
        << "  macro_f1          " << fmt("%.4f", m.macro_f1) << "\n"
        << "  weighted_accuracy " << fmt("%.4f", m.weighted_accuracy) << "\n";
    for (int c = 0; c < 2; ++c) {
        out << "  class " << c << ": precision " << fmt("%.4f", m.precision[c]) << " recall "
            << fmt("%.4f", m.recall[c]) << " f1 " << fmt("%.4f", m.f1[c]) << "\n";
    }
    if (m.auc) out << "  auc               " << fmt("%.4f", *m.auc) << "\n";
    out << "  (" << kWeightedAccuracyDefinition << ")\n";
}

void save_reported(std::ostream& out, const Checkpoint& ckpt, const std::string& path) {
    const std::size_t bytes = save(ckpt, path);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%08x", ckpt.checksum());
    out << "wrote " << path << " (" << bytes << " bytes, " << ckpt.parameter_count() << " parameters, checksum " << buf
        << ")\n";
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) fail(ErrorKind::Usage, "bad lambda in --grid: '" + item + "'");
        if (v < 0.0) fail(ErrorKind::Parameter, "lambda must be >= 0, got " + item);
        grid.push_back(v);
    }
    if (grid.empty()) fail(ErrorKind::Usage, "--grid needs at least one value");
    return grid;
}

// Shared flags for the head-training subcommands.
struct TrainFlags {
    std::string data;
    double lambda = 0.1;
    bool full_scale = false;
    std::size_t epochs = 0;
    std::size_t batch = 0;
    double lr = 0.0;
    std::size_t pool_layer = 0;
    std::string report;
    bool sum_ctc = false;

    void add(CLI::App* sub) {
        sub->add_option("--data", data, "Dataset directory with manifest.jsonl")->required();
        sub->add_option("--lambda", lambda, "Weight of the CTC loss")->check(CLI::NonNegativeNumber);
        sub->add_flag("--paper-hyper", full_scale, "Use the full-scale fine-tuning values: lr 5e-5, batch 2, 100 epochs");
        sub->add_option("--epochs", epochs, "Epochs (default 30)");
        sub->add_option("--batch", batch, "Batch size (default 8)");
        sub->add_option("--lr", lr, "Adam learning rate (default 1e-2)");
        sub->add_option("--pool-layer", pool_layer, "Pool after this transformer layer (0 = last)");
        sub->add_option("--report", report, "Write per-epoch records as JSON lines");
        sub->add_flag("--ctc-sum", sum_ctc, "Sum the CTC loss over the batch instead of averaging");
    }

    TrainOptions options(std::uint64_t seed) const {
        TrainOptions o = full_scale ? TrainOptions::full_scale() : TrainOptions{};
        o.lambda = lambda;
        if (epochs) o.epochs = epochs;
        if (batch) o.batch_size = batch;
        if (lr > 0.0) o.lr = lr;
        o.seed = seed;
        o.pool_layer = pool_layer;
        o.ctc_reduction = sum_ctc ? CtcReduction::SumOverBatch : CtcReduction::MeanOverBatch;
        return o;
    }
};

DatasetSplit load_split(const std::string& dir, std::uint64_t seed, std::ostream& out) {
    const auto items = load_dataset(dir);
    DatasetSplit split = split_dataset(items, {}, seed);
    out << "split seed " << seed << ": " << split.train.size() << " train / " << split.val.size() << " val / "
        << split.test.size() << " test\n";
    return split;
}

void write_report(const std::string& path, const TrainReport& report) {
    if (path.empty()) return;
    std::ofstream f(path);
    if (!f) fail(ErrorKind::Io, "cannot write report " + path);
    f << report_jsonl(report);
    if (!f) fail(ErrorKind::Io, "short write on " + path);
}

void print_epochs(std::ostream& out, const TrainReport& report) {
    if (report.epochs.empty()) return;
    const LossBreakdown& first = report.epochs.front().mean;
    const LossBreakdown& last = report.epochs.back().mean;
    out << "epoch 1 loss " << fmt("%.5f", first.total) << " (cls " << fmt("%.5f", first.cls_loss) << ", ctc "
        << fmt("%.5f", first.asr_loss) << ")\n";
    out << "epoch " << report.epochs.size() << " loss " << fmt("%.5f", last.total) << " (cls "
        << fmt("%.5f", last.cls_loss) << ", ctc " << fmt("%.5f", last.asr_loss) << ")\n";
}

std::string stem_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

} // namespace

std::optional<std::uint64_t> seed_from_env() {
    const char* v = std::getenv("TOXEDGE_SEED");
    if (!v || !*v) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const unsigned long long s = std::strtoull(v, &end, 10);
    if (errno != 0 || *end != '\0' || v[0] == '-') fail(ErrorKind::Usage, std::string("TOXEDGE_SEED is not a seed: ") + v);
    return static_cast<std::uint64_t>(s);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"toxedge: toxic speech detection with a compact multitask audio encoder"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::function<void()> action;
    std::uint64_t default_seed = kDefaultSeed;
    std::uint64_t seed = 0;
    auto seed_option = [&](CLI::App* sub, const char* what) {
        sub->add_option("--seed", seed, std::string(what) + " (default 1234, or TOXEDGE_SEED)");
    };

    // gen-model
    std::string preset = "tiny";
    std::string output;
    auto* gen_model = app.add_subcommand("gen-model", "Write a randomly initialized checkpoint");
    gen_model->add_option("--preset", preset, "tiny or base-mirror")->check(CLI::IsMember({"tiny", "base-mirror"}));
    seed_option(gen_model, "Initialization seed");
    gen_model->add_option("-o,--output", output, "Checkpoint path")->required();
    gen_model->callback([&] {
        action = [&] {
            const ModelConfig cfg = ModelConfig::preset_named(preset);
            save_reported(out, init_checkpoint(cfg, seed), output);
        };
    });

    // gen-data
    std::size_t count = 200;
    double duration = 1.0;
    auto* gen_data = app.add_subcommand("gen-data", "Write a synthetic labeled dataset (WAV files + manifest.jsonl)");
    seed_option(gen_data, "Dataset seed");
    gen_data->add_option("--n", count, "Number of clips (default 200)");
    gen_data->add_option("--dur", duration, "Clip duration in seconds (default 1.0)");
    gen_data->add_option("--preset", preset, "Preset whose vocabulary the transcripts use")
        ->check(CLI::IsMember({"tiny", "base-mirror"}));
    gen_data->add_option("-o,--output", output, "Output directory")->required();
    gen_data->callback([&] {
        action = [&] {
            auto items = synth_dataset(seed, count, duration, ModelConfig::preset_named(preset));
            write_dataset(output, items);
            const std::size_t toxic = static_cast<std::size_t>(
                std::count_if(items.begin(), items.end(), [](const auto& u) { return u.label == Label::Toxic; }));
            out << "wrote " << items.size() << " clips (" << toxic << " toxic) to " << output << "\n";
        };
    });

    // train-heads
    std::string model_path;
    TrainFlags train_flags;
    auto* train = app.add_subcommand("train-heads", "Train the classification and CTC heads on a frozen encoder");
    train->add_option("--model", model_path, "Input checkpoint")->required();
    train_flags.add(train);
    seed_option(train, "Split and shuffle seed");
    train->add_option("-o,--output", output, "Trained checkpoint")->required();
    train->callback([&] {
        action = [&] {
            const Checkpoint ckpt = load(model_path);
            const DatasetSplit split = load_split(train_flags.data, seed, out);
            const TrainOptions opts = train_flags.options(seed);
            out << "lambda " << opts.lambda << ", " << opts.epochs << " epochs, batch " << opts.batch_size << ", lr "
                << opts.lr << "\n";
            TrainResult r = train_heads(ckpt, split, opts);
            print_epochs(out, r.report);
            out << "validation:\n";
            print_metrics(out, r.report.validation);
            write_report(train_flags.report, r.report);
            save_reported(out, r.model, output);
        };
    });

    // grid-lambda
    std::string grid_text = "0,0.05,0.1,0.2";
    TrainFlags grid_flags;
    auto* grid = app.add_subcommand("grid-lambda", "Pick the CTC weight by validation macro F1");
    grid->add_option("--model", model_path, "Input checkpoint")->required();
    grid->add_option("--grid", grid_text, "Comma-separated lambda candidates");
    grid_flags.add(grid);
    seed_option(grid, "Split and shuffle seed");
    grid->add_option("-o,--output", output, "Optional: write heads trained with the winning lambda");
    grid->callback([&] {
        action = [&] {
            const std::vector<double> candidates = parse_grid(grid_text);
            const Checkpoint ckpt = load(model_path);
            const DatasetSplit split = load_split(grid_flags.data, seed, out);
            const GridResult g = lambda_grid_search(candidates, ckpt, split, grid_flags.options(seed));
            out << "lambda    macro_f1  accuracy  final_loss\n";
            for (const GridEntry& e : g.entries) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), "%-9g %-9.4f %-9.4f %.5f\n", e.lambda, e.validation.macro_f1,
                              e.validation.accuracy,
                              e.report.epochs.empty() ? 0.0 : e.report.epochs.back().mean.total);
                out << buf;
            }
            out << "best lambda " << g.best_lambda << " (ties go to the smallest)\n";
            if (!output.empty()) {
                TrainOptions opts = grid_flags.options(seed);
                opts.lambda = g.best_lambda;
                save_reported(out, train_heads(ckpt, split, opts).model, output);
            }
        };
    });

    // distill
    std::string teacher_path;
    std::size_t student_layers = 0;
    DistillHyper hyper;
    TrainFlags distill_flags;
    auto* dist = app.add_subcommand("distill", "Distill a trained teacher into a truncated student");
    dist->add_option("--teacher", teacher_path, "Trained teacher checkpoint")->required();
    dist->add_option("--student-layers", student_layers, "Transformer layers kept (default round(L*5/12))");
    dist->add_option("--alpha", hyper.alpha, "Weight of the hard-label term (default 0.5)");
    dist->add_option("--temp", hyper.temperature, "Softmax temperature (default 4.0)");
    distill_flags.add(dist);
    seed_option(dist, "Split and shuffle seed");
    dist->add_option("-o,--output", output, "Student checkpoint")->required();
    dist->callback([&] {
        action = [&] {
            hyper.validate();
            const Checkpoint teacher = load(teacher_path);
            const std::size_t layers =
                student_layers ? student_layers : default_student_layers(teacher.config.num_layers);
            const Checkpoint student = make_student(teacher, layers);
            const DatasetSplit split = load_split(distill_flags.data, seed, out);
            out << "student " << layers << " of " << teacher.config.num_layers << " layers, alpha " << hyper.alpha
                << ", T " << hyper.temperature << "\n";
            const double before = argmax_agreement(teacher, student, split.test);
            TrainResult r = distill(teacher, student, split, hyper, distill_flags.options(seed));
            const double after = argmax_agreement(teacher, r.model, split.test);
            print_epochs(out, r.report);
            out << "teacher agreement on test split: " << fmt("%.4f", before) << " -> " << fmt("%.4f", after) << "\n";
            out << "validation:\n";
            print_metrics(out, r.report.validation);
            write_report(distill_flags.report, r.report);
            save_reported(out, r.model, output);
        };
    });

    // quantize
    auto* quant = app.add_subcommand("quantize", "Store every .weight tensor as int8 (symmetric per output channel)");
    quant->add_option("--model", model_path, "Input checkpoint")->required();
    quant->add_option("-o,--output", output, "Quantized checkpoint")->required();
    quant->callback([&] {
        action = [&] {
            std::vector<std::string> notices;
            const Checkpoint q = quantize_model(load(model_path), &notices);
            for (const std::string& n : notices) err << "note: " << n << "\n";
            save_reported(out, q, output);
        };
    });

    // prune
    double sparsity = 0.5;
    auto* prune = app.add_subcommand("prune", "Zero the smallest-magnitude weights (storage stays dense)");
    prune->add_option("--model", model_path, "Input checkpoint")->required();
    prune->add_option("--sparsity", sparsity, "Fraction of each weight tensor to zero, in [0, 1)");
    prune->add_option("-o,--output", output, "Pruned checkpoint")->required();
    prune->callback([&] {
        action = [&] {
            if (!(sparsity >= 0.0 && sparsity < 1.0)) {
                fail(ErrorKind::Parameter, "--sparsity must be in [0, 1), got " + fmt("%g", sparsity));
            }
            save_reported(out, prune_magnitude(load(model_path), {sparsity}), output);
        };
    });

    // infer
    std::string wav_path;
    std::string dump_path;
    std::size_t infer_pool = 0;
    auto* infer = app.add_subcommand("infer", "Classify one WAV file and decode its transcript");
    infer->add_option("--model", model_path, "Checkpoint")->required();
    infer->add_option("--wav", wav_path, "16 kHz mono PCM16 WAV")->required();
    infer->add_option("--dump-embeddings", dump_path, "Append the pooled embedding to this CSV");
    infer->add_option("--pool-layer", infer_pool, "Pool after this transformer layer (0 = last)");
    infer->callback([&] {
        action = [&] {
            const Checkpoint ckpt = load(model_path);
            const Waveform w = normalize(read_wav(wav_path));
            const ForwardResult r = forward(w, ckpt, {infer_pool});
            const double logits[2] = {r.toxicity_logits[0], r.toxicity_logits[1]};
            const std::vector<double> p = softmax_t(logits);
            out << "label " << (p[1] > p[0] ? "toxic" : "non-toxic") << "\n";
            out << "p(non-toxic) " << fmt("%.6f", p[0]) << "\n";
            out << "p(toxic) " << fmt("%.6f", p[1]) << "\n";
            out << "asr " << join_tokens(greedy_decode(r.ctc_logits)) << "\n";
            if (!dump_path.empty()) {
                const bool fresh = !std::filesystem::exists(dump_path);
                std::ofstream f(dump_path, std::ios::app);
                if (!f) fail(ErrorKind::Io, "cannot write " + dump_path);
                if (fresh) {
                    f << "wav";
                    for (std::size_t i = 0; i < r.pooled.size(); ++i) f << ",e" << i;
                    f << "\n";
                }
                f << wav_path;
                for (float v : r.pooled.values()) f << ',' << fmt("%.9g", v);
                f << "\n";
            }
        };
    });

    // bench
    std::string models_text;
    std::string bench_data;
    std::string split_name = "test";
    BenchOptions bench_opts;
    auto* bench = app.add_subcommand("bench", "Measure F1, size, tracked peak RAM, latency and RTF per variant");
    bench->add_option("--models", models_text, "Comma-separated checkpoints; the first is the ratio baseline")
        ->required();
    bench->add_option("--data", bench_data, "Dataset directory")->required();
    bench->add_option("--split", split_name, "Which split to measure on")->check(CLI::IsMember({"test", "all"}));
    bench->add_option("--reps", bench_opts.reps, "Timed passes over the clips (default 5)")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", bench_opts.warmup, "Untimed passes (default 1)");
    seed_option(bench, "Split seed");
    bench->add_option("-o,--output", output, "CSV path")->required();
    bench->callback([&] {
        action = [&] {
            std::vector<BenchVariant> variants;
            std::stringstream ss(models_text);
            std::string path;
            while (std::getline(ss, path, ',')) {
                if (!path.empty()) variants.push_back({stem_of(path), path});
            }
            if (variants.empty()) fail(ErrorKind::Usage, "--models needs at least one checkpoint");
            std::vector<LabeledUtterance> clips = load_dataset(bench_data);
            if (split_name == "test") clips = split_dataset(clips, {}, seed).test;
            out << "measuring " << variants.size() << " variants on " << clips.size() << " clips\n";
            const BenchReport report = bench_suite(variants, clips, bench_opts);
            write_table(report, out);
            std::ofstream f(output);
            if (!f) fail(ErrorKind::Io, "cannot write " + output);
            write_csv(report, f);
            if (!f) fail(ErrorKind::Io, "short write on " + output);
            out << "wrote " << output << "\n";
        };
    });

    // version
    bool as_json = false;
    auto* version = app.add_subcommand("version", "Print version, checkpoint format and seed policy");
    version->add_flag("--json", as_json, "Machine-readable output");
    version->callback([&] { action = [&] { out << (as_json ? version_json() + "\n" : version_text()); }; });

    try {
        if (auto env = seed_from_env()) default_seed = *env;
        seed = default_seed;
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error[usage]: " << e.what() << "\n";
        return exit_code(ErrorKind::Usage);
    } catch (const Error& e) {
        err << "error[" << kind_name(e.kind()) << "]: " << e.what() << "\n";
        return exit_code(e.kind());
    }

    try {
        if (action) action();
        return 0;
    } catch (const Error& e) {
        err << "error[" << kind_name(e.kind()) << "]: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::bad_alloc&) {
        err << "error[contract]: out of memory\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error[contract]: " << e.what() << "\n";
        return 3;
    }
}

} // namespace toxedge::cli
