#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "semihmer/checkpoint.hpp"
#include "semihmer/config.hpp"
#include "semihmer/eval.hpp"
#include "semihmer/inkml.hpp"
#include "semihmer/plot.hpp"
#include "semihmer/synth.hpp"
#include "semihmer/trainer.hpp"

namespace fs = std::filesystem;
using namespace semihmer;

namespace {

Vocabulary vocab_from_config(const Config& cfg) {
    const std::string path = cfg.get("data.vocab");
    return path.empty() ? build_vocabulary(default_token_list()) : load_vocabulary(path);
}

// Remaining tokens after the declared flags: pairs of --config.key value.
void apply_overrides(Config& cfg, const std::vector<std::string>& toks) {
    for (size_t i = 0; i < toks.size(); i += 2) {
        const std::string& flag = toks[i];
        if (flag.rfind("--", 0) != 0)
            fail("expected a --config.key flag, got '" + flag + "'");
        if (i + 1 >= toks.size()) fail("flag '" + flag + "' is missing a value");
        cfg.set(flag.substr(2), toks[i + 1]);
    }
}

Config base_config(const std::string& config_file) {
    Config cfg;
    if (const char* env = std::getenv("SEMIHMER_CONFIG"); env && *env) cfg.load_file(env);
    if (!config_file.empty()) cfg.load_file(config_file);
    return cfg;
}

int cmd_synth(const std::string& out_dir, int n_labeled, int n_unlabeled, uint64_t seed,
              int height, int min_len, int max_len, const std::string& grammar_file) {
    Vocabulary vocab = build_vocabulary(default_token_list());
    SynthConfig sc = default_synth_config();
    sc.image_height = height;
    sc.min_len = min_len;
    sc.max_len = max_len;
    if (!grammar_file.empty()) {
        std::ifstream in(grammar_file);
        if (!in) fail("cannot open grammar file '" + grammar_file + "'");
        std::string tok;
        std::vector<std::string> allowed;
        while (std::getline(in, tok)) {
            while (!tok.empty() && (tok.back() == '\r' || tok.back() == ' ')) tok.pop_back();
            if (tok.empty()) continue;
            if (!vocab.has(tok))
                fail("grammar token '" + tok + "' is not in the vocabulary");
            allowed.push_back(tok);
        }
        if (allowed.empty()) fail("grammar file '" + grammar_file + "' lists no tokens");
        sc.tokens = allowed;
    }

    fs::create_directories(out_dir);
    std::vector<ManifestEntry> labeled, unlabeled;
    auto emit = [&](int i, bool with_label) {
        Sample s = synth_sample(mix_seed(seed, with_label ? 1u : 2u, static_cast<uint64_t>(i)),
                                sc, vocab);
        ManifestEntry e;
        e.path = strfmt("%s_%05d.png", with_label ? "lab" : "unl", i);
        write_png_gray(out_dir + "/" + e.path, s.image);
        if (with_label) {
            e.labeled = true;
            for (size_t k = 0; k + 1 < s.label.size(); ++k)  // strip the trailing eos
                e.tokens.push_back(vocab.token_of(s.label[k]));
        }
        (with_label ? labeled : unlabeled).push_back(std::move(e));
    };
    for (int i = 0; i < n_labeled; ++i) emit(i, true);
    for (int i = 0; i < n_unlabeled; ++i) emit(i, false);
    write_manifest(out_dir + "/labeled.tsv", labeled);
    write_manifest(out_dir + "/unlabeled.tsv", unlabeled);
    save_vocabulary(vocab, out_dir + "/vocab.txt");
    std::cout << "wrote " << n_labeled << " labeled + " << n_unlabeled << " unlabeled samples to "
              << out_dir << "\n";
    return 0;
}

int cmd_render_inkml(const std::string& in_path, const std::string& out_path, int height) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) fail("cannot open '" + in_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    InkDocument ink = parse_inkml(ss.str());
    Tensor img = render_strokes(ink, height);
    write_png_gray(out_path, img);
    std::cout << "rendered " << ink.strokes.size() << " strokes to " << out_path;
    if (ink.has_annotation) std::cout << "  (truth: " << ink.annotation << ")";
    std::cout << "\n";
    return 0;
}

int cmd_train(const Config& cfg, bool resume) {
    Vocabulary vocab = vocab_from_config(cfg);
    const std::string labeled_path = cfg.get("data.labeled");
    if (labeled_path.empty()) fail("data.labeled is required for training");
    std::vector<Sample> labeled = load_corpus(labeled_path, vocab);
    std::vector<Sample> unlabeled;
    if (!cfg.get("data.unlabeled").empty()) unlabeled = load_corpus(cfg.get("data.unlabeled"), vocab);

    TrainSettings ts = TrainSettings::from(cfg);
    ts.validate();
    Model model(ModelConfig::from(cfg, vocab.size()), ts.seed);
    Adadelta opt(model.params, ts.rho, ts.eps);

    int start_epoch = 0;
    if (resume) {
        CheckpointInfo info = load_checkpoint(ts.checkpoint_path, model, opt);
        start_epoch = info.epoch;
        std::cout << "resumed from '" << ts.checkpoint_path << "' at epoch " << start_epoch << "\n";
    }
    TrainResult r = run_training(model, opt, ts, labeled, unlabeled, vocab, start_epoch);
    std::cout << "trained to epoch " << r.final_epoch << " (" << r.history.size()
              << " iterations this run)\n";
    if (!r.history.empty())
        std::cout << "final: " << format_metrics_line(r.history.back()) << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, int max_len,
             const std::string& dump_path) {
    CheckpointInfo info = peek_checkpoint(ckpt_path);
    Config cfg;
    cfg.load_text(info.config_text, ckpt_path + ":config");
    Vocabulary vocab = vocab_from_config(cfg);
    std::vector<Sample> data = load_corpus(data_path, vocab);

    Model model(ModelConfig::from(cfg, vocab.size()), 0);
    Adadelta opt(model.params);
    load_checkpoint(ckpt_path, model, opt);

    EvalReport r = evaluate(model, data, vocab, max_len);
    std::cout << format_report_table(r);
    std::cout << format_report_line(r) << "\n";
    if (!dump_path.empty()) {
        std::ofstream out(dump_path);
        if (!out) fail("cannot write '" + dump_path + "'");
        for (const EvalSample& s : r.per_sample) {
            auto join = [&](const std::vector<int>& ids) {
                std::string t;
                for (size_t i = 0; i < ids.size(); ++i) {
                    if (i) t += ' ';
                    t += vocab.token_of(ids[i]);
                }
                return t;
            };
            out << join(s.predicted) << '\t' << join(s.reference) << '\t' << s.distance << "\n";
        }
    }
    return 0;
}

int cmd_overfit_check(uint64_t seed, int max_steps, bool verbose) {
    Vocabulary vocab = build_vocabulary(default_token_list());
    SynthConfig sc = default_synth_config();
    sc.image_height = 32;
    sc.min_len = 1;
    sc.max_len = 5;
    std::vector<Sample> samples;
    for (int i = 0; i < 10; ++i)
        samples.push_back(synth_sample(mix_seed(seed, 0xF17u, static_cast<uint64_t>(i)), sc, vocab));

    ModelConfig mc;
    mc.enc.growth = 6;
    mc.enc.block_depths = {2, 2};
    mc.enc.initial_channels = 12;
    mc.dec.hidden = 32;
    mc.dec.embed = 16;
    mc.dec.attn = 16;
    mc.dec.fusion = 32;
    mc.classes = vocab.size();
    Model model(mc, seed);
    Adadelta opt(model.params);

    TrainSettings ts;
    ts.batch_size = 5;
    const int spe = static_cast<int>((samples.size() + ts.batch_size - 1) / ts.batch_size);
    ts.epochs = std::max(1, max_steps / spe);
    ts.warmup_epochs = ts.epochs;  // supervised + counting only
    ts.seed = seed;
    ts.max_len = 12;
    ts.peak_lr_warmup = 1.0;

    // run epoch by epoch so the decode check can stop the budget early
    int steps = 0;
    double exprate = 0.0;
    for (int epoch = 0; epoch < ts.epochs; ++epoch) {
        run_training(model, opt, ts, samples, {}, vocab, epoch, epoch + 1);
        steps += spe;
        exprate = evaluate(model, samples, vocab, ts.max_len).exprate;
        if (verbose && (epoch % 20 == 0 || exprate == 1.0))
            std::cout << "step " << steps << "  exprate " << exprate << "\n";
        if (exprate == 1.0) {
            std::cout << "overfit check passed: exprate 1.0 after " << steps << " steps\n";
            return 0;
        }
    }
    std::cout << "overfit check FAILED: exprate " << exprate << " after " << steps << " steps\n";
    return 1;
}

int cmd_plot(const std::string& metrics_path, const std::string& out_png) {
    std::vector<IterationRecord> recs = read_metrics(metrics_path);
    plot_metrics(recs, out_png);
    std::cout << "plotted " << recs.size() << " iterations to " << out_png << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semihmer: semi-supervised handwritten math expression recognition"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string s_out;
    int s_nl = 10, s_nu = 0, s_height = 32, s_min = 1, s_max = 8;
    uint64_t s_seed = 0;
    std::string s_grammar;
    synth->add_option("--out", s_out, "output directory")->required();
    synth->add_option("--n-labeled", s_nl, "labeled sample count")->capture_default_str();
    synth->add_option("--n-unlabeled", s_nu, "unlabeled sample count")->capture_default_str();
    synth->add_option("--seed", s_seed, "generation seed")->capture_default_str();
    synth->add_option("--height", s_height, "image height in pixels")->capture_default_str();
    synth->add_option("--min-len", s_min, "minimum expression length")->capture_default_str();
    synth->add_option("--max-len", s_max, "maximum expression length")->capture_default_str();
    synth->add_option("--grammar", s_grammar, "token whitelist file (default: all tokens)");

    // render-inkml
    auto* render = app.add_subcommand("render-inkml", "rasterize an InkML file");
    std::string r_in, r_out;
    int r_height = 64;
    render->add_option("--in", r_in, "input .inkml file")->required();
    render->add_option("--out", r_out, "output .png file")->required();
    render->add_option("--height", r_height, "target image height")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "run the training schedule");
    std::string t_config;
    bool t_resume = false;
    train->add_option("--config", t_config, "key=value config file");
    train->add_flag("--resume", t_resume, "continue from the configured checkpoint");
    train->allow_extras();  // --config.key value overrides

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    std::string e_ckpt, e_data, e_dump;
    int e_maxlen = 48;
    ev->add_option("--checkpoint", e_ckpt, "checkpoint file")->required();
    ev->add_option("--data", e_data, "manifest of labeled samples")->required();
    ev->add_option("--max-len", e_maxlen, "greedy decode cap")->capture_default_str();
    ev->add_option("--dump", e_dump, "per-sample dump file (pred TAB ref TAB distance)");

    // overfit-check
    auto* ov = app.add_subcommand("overfit-check", "train on 10 samples until exact recall");
    uint64_t o_seed = 0;
    int o_steps = 2000;
    bool o_verbose = false;
    ov->add_option("--seed", o_seed, "seed for data and weights")->capture_default_str();
    ov->add_option("--steps", o_steps, "optimization step budget")->capture_default_str();
    ov->add_flag("--verbose", o_verbose, "log progress");

    // plot
    auto* pl = app.add_subcommand("plot", "render metric curves from a log");
    std::string p_metrics, p_out;
    pl->add_option("--metrics", p_metrics, "metrics log file")->required();
    pl->add_option("--out", p_out, "output .png file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) return cmd_synth(s_out, s_nl, s_nu, s_seed, s_height, s_min, s_max, s_grammar);
        if (*render) return cmd_render_inkml(r_in, r_out, r_height);
        if (*train) {
            Config cfg = base_config(t_config);
            try {
                apply_overrides(cfg, train->remaining());
            } catch (const Error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 2;
            }
            return cmd_train(cfg, t_resume);
        }
        if (*ev) return cmd_eval(e_ckpt, e_data, e_maxlen, e_dump);
        if (*ov) return cmd_overfit_check(o_seed, o_steps, o_verbose);
        if (*pl) return cmd_plot(p_metrics, p_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
