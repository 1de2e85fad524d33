// camlab: file-based pipeline driver.
//   gen -> collect -> augment -> train -> eval, plus verify for the
//   shift-invariance theorem suite. Exit codes: 0 success, 1 verification or
//   runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "camlab/bnb.hpp"
#include "camlab/instgen.hpp"
#include "camlab/milp.hpp"
#include "camlab/policy.hpp"
#include "camlab/samples.hpp"
#include "camlab/trainer.hpp"
#include "camlab/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot hash missing file " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 14];
    while (f.read(buf, sizeof buf) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char out[32];
    std::snprintf(out, sizeof out, "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return out;
}

/// Relative paths resolve against CAMLAB_DATA_DIR when it is set.
std::string resolve(const std::string& p) {
    if (p.empty()) return p;
    const char* base = std::getenv("CAMLAB_DATA_DIR");
    if (!base || *base == '\0' || fs::path(p).is_absolute()) return p;
    return (fs::path(base) / p).string();
}

/// Written before any work starts so a crashed run still records its inputs.
void write_manifest(const std::string& path, const std::string& subcommand,
                    const json& config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& input_schemas,
                    const std::vector<std::string>& outputs) {
    json j;
    j["schema"] = "manifest-v1";
    j["subcommand"] = subcommand;
    j["config"] = config;
    json in = json::array();
    for (std::size_t i = 0; i < inputs.size(); ++i)
        in.push_back({{"path", inputs[i]},
                      {"hash", fnv1a_file(inputs[i])},
                      {"input_schema", input_schemas[i]}});
    j["inputs"] = in;
    j["outputs"] = outputs;
    fs::path dir = fs::path(path).parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest " + path);
    f << j.dump(2) << '\n';
}

std::vector<std::string> list_instance_files(const std::string& dir) {
    std::vector<std::string> files;
    if (!fs::is_directory(dir))
        throw std::runtime_error("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string name = e.path().filename().string();
        if (name.size() > 5 && name.ends_with(".json") && name != "manifest.json")
            files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no instance files in " + dir);
    return files;
}

std::vector<camlab::MilpInstance> load_instances(const std::vector<std::string>& files) {
    std::vector<camlab::MilpInstance> out;
    for (const auto& f : files) {
        camlab::MilpInstance m = camlab::load_instance(f);
        auto rep = camlab::validate(m);
        if (!rep.ok())
            throw std::runtime_error("invalid instance " + f + ":\n" + rep.to_string());
        out.push_back(std::move(m));
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    fs::path dir = fs::path(path).parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

// ---------------------------------------------------------------------------

int cmd_gen(const std::string& family, int count, std::uint64_t seed,
            const std::string& out_dir) {
    camlab::instgen::Family fam = camlab::instgen::family_from_string(family);
    fs::create_directories(out_dir);
    std::vector<std::string> outputs;
    for (int i = 0; i < count; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_%04d.json", family.c_str(), i);
        outputs.push_back((fs::path(out_dir) / name).string());
    }
    write_manifest((fs::path(out_dir) / "manifest.json").string(), "gen",
                   {{"family", family}, {"count", count}, {"seed", seed}}, {}, {},
                   outputs);
    for (int i = 0; i < count; ++i)
        camlab::save_instance(
            camlab::instgen::gen_default(fam, seed + static_cast<std::uint64_t>(i)),
            outputs[i]);
    std::cout << "wrote " << count << " " << family << " instances to " << out_dir
              << "\n";
    return 0;
}

int cmd_collect(const std::string& inst_dir, long cap, std::uint64_t seed,
                const std::string& out_file) {
    auto files = list_instance_files(inst_dir);
    write_manifest(out_file + ".manifest.json", "collect",
                   {{"cap", cap}, {"seed", seed}}, files,
                   std::vector<std::string>(files.size(), camlab::kInstanceSchema),
                   {out_file});
    auto instances = load_instances(files);
    camlab::CollectStats stats;
    camlab::BnbOptions opts;
    opts.seed = seed;
    auto samples = camlab::collect_expert_samples(instances, cap, &stats, opts);
    camlab::save_samples(samples, out_file);
    std::cout << "collected " << samples.size() << " samples from "
              << stats.instances_used << " instances (" << stats.instances_skipped
              << " skipped)\n";
    return 0;
}

int cmd_augment(const std::string& in_file, int k, double magnitude,
                std::uint64_t seed, const std::string& out_file) {
    write_manifest(out_file + ".manifest.json", "augment",
                   {{"k", k}, {"magnitude", magnitude}, {"seed", seed}}, {in_file},
                   {camlab::kStateSchema}, {out_file});
    auto samples = camlab::load_samples(in_file);
    std::mt19937_64 rng(seed);
    std::vector<camlab::ExpertSample> out;
    long pair_id = 0;
    for (const auto& s : samples) {
        if (s.shift) continue;  // re-augmenting starts from the originals
        camlab::ExpertSample ori = s;
        ori.pair_id = pair_id;
        out.push_back(ori);
        for (int a = 0; a < k; ++a) {
            camlab::ShiftVector sv = camlab::sample_shift(s.instance, magnitude, rng);
            out.push_back(camlab::augment_sample(s, sv, pair_id));
        }
        ++pair_id;
    }
    camlab::save_samples(out, out_file);
    std::cout << "wrote " << out.size() << " samples (" << pair_id
              << " originals x " << k << " partners)\n";
    return 0;
}

int cmd_train(const std::string& config_file, const std::vector<std::string>& sample_files,
              std::uint64_t seed, bool seed_given, const std::string& out_model,
              std::string history_file) {
    camlab::TrainConfig cfg;
    if (!config_file.empty()) cfg = camlab::load_train_config(config_file);
    if (seed_given) cfg.seed = seed;
    if (history_file.empty()) history_file = out_model + ".history.csv";

    json cfgj = {{"lambda1", cfg.lambda1}, {"lambda2", cfg.lambda2},
                 {"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size},
                 {"max_epochs", cfg.max_epochs},
                 {"plateau_patience", cfg.plateau_patience},
                 {"plateau_factor", cfg.plateau_factor},
                 {"augmentations_per_sample", cfg.augmentations_per_sample},
                 {"shift_magnitude", cfg.shift_magnitude},
                 {"supervise_augmented", cfg.supervise_augmented},
                 {"validation_fraction", cfg.validation_fraction},
                 {"spot_check_fraction", cfg.spot_check_fraction},
                 {"seed", cfg.seed}};
    write_manifest(out_model + ".manifest.json", "train", cfgj, sample_files,
                   std::vector<std::string>(sample_files.size(), camlab::kStateSchema),
                   {out_model, history_file});

    std::vector<camlab::ExpertSample> dataset;
    for (const auto& f : sample_files)
        for (auto& s : camlab::load_samples(f)) dataset.push_back(std::move(s));
    std::cout << "loaded " << dataset.size() << " samples\n";

    if (cfg.spot_check_fraction > 0) {
        std::mt19937_64 rng(cfg.seed ^ 0x5b07c3ecULL);
        auto rep = camlab::spot_check_labels(dataset, cfg.spot_check_fraction, rng);
        std::cout << "label spot-check: " << rep.checked << " checked, "
                  << rep.mismatches << " mismatches\n";
        if (!rep.pass()) {
            std::cerr << "augmented labels disagree with a fresh expert recompute\n";
            return 1;
        }
    }

    camlab::TrainResult res = camlab::train(cfg, dataset);
    camlab::save_model(res.params, out_model);
    write_text(history_file, res.history_csv());
    if (!res.history.empty()) {
        const auto& last = res.history.back();
        std::cout << "trained " << res.history.size() << " epochs; final l_sup "
                  << last.l_sup << ", val acc@1 " << last.val_acc1 << "\n";
    }
    std::cout << "model: " << out_model << "\nhistory: " << history_file << "\n";
    return 0;
}

int cmd_eval(const std::string& model_file, const std::string& inst_dir,
             const std::string& policies_csv, const std::string& out_file,
             const std::string& samples_file, double time_limit, long node_limit,
             std::uint64_t seed, const std::string& level) {
    std::vector<std::string> names;
    std::stringstream ss(policies_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) names.push_back(tok);
    if (names.empty()) throw CLI::ValidationError("--policies", "empty policy list");

    bool needs_model =
        std::find(names.begin(), names.end(), "learned") != names.end();
    if (needs_model && model_file.empty())
        throw CLI::ValidationError("--model", "required for the learned policy");
    auto files = list_instance_files(inst_dir);
    std::vector<std::string> inputs = files;
    std::vector<std::string> schemas(files.size(), camlab::kInstanceSchema);
    if (needs_model) {
        inputs.push_back(model_file);
        schemas.push_back(camlab::kModelSchema);
    }
    if (!samples_file.empty()) {
        inputs.push_back(samples_file);
        schemas.push_back(camlab::kStateSchema);
    }
    write_manifest(out_file + ".manifest.json", "eval",
                   {{"policies", policies_csv}, {"time_limit", time_limit},
                    {"node_limit", node_limit}, {"seed", seed}, {"level", level}},
                   inputs, schemas, {out_file});

    auto instances = load_instances(files);
    std::vector<std::unique_ptr<camlab::BranchingPolicy>> owned;
    std::vector<camlab::BranchingPolicy*> policies;
    for (const auto& n : names) {
        if (n == "fsb") owned.push_back(std::make_unique<camlab::FsbPolicy>());
        else if (n == "mostfrac") owned.push_back(std::make_unique<camlab::MostFractionalPolicy>());
        else if (n == "random") owned.push_back(std::make_unique<camlab::RandomPolicy>(seed));
        else if (n == "pseudocost") owned.push_back(std::make_unique<camlab::PseudocostPolicy>());
        else if (n == "learned")
            owned.push_back(std::make_unique<camlab::LearnedPolicy>(
                camlab::load_model(model_file)));
        else throw CLI::ValidationError("--policies", "unknown policy " + n);
        policies.push_back(owned.back().get());
    }

    camlab::BnbLimits limits{time_limit, node_limit};
    camlab::BnbOptions opts;
    opts.seed = seed;
    auto rep = camlab::compare_policies(instances, policies, limits, opts,
                                        /*virtual_time=*/true, level);
    std::string csv;
    if (policies.size() == 1) {
        // One policy: no competition, so the wins column is omitted.
        csv = "policy,level,sgm_time_s,sgm_nodes,solved\n";
        char buf[256];
        const auto& r = rep.rows[0];
        std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.6g,%ld\n", r.policy.c_str(),
                      level.c_str(), r.sgm_time_s, r.sgm_nodes, r.solved);
        csv += buf;
    } else {
        csv = rep.to_csv();
    }
    write_text(out_file, csv);
    std::cout << csv;

    if (!samples_file.empty() && needs_model) {
        auto testset = camlab::load_samples(samples_file);
        auto t = camlab::eval_topk(camlab::load_model(model_file), testset);
        std::string tcsv = "k,acc\n";
        char buf[64];
        for (std::size_t i = 0; i < t.ks.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%d,%.6g\n", t.ks[i], t.acc[i]);
            tcsv += buf;
        }
        write_text(out_file + ".topk.csv", tcsv);
        std::cout << tcsv;
    }
    return 0;
}

int cmd_verify(const std::string& inst_dir, int shifts_per_instance, double tol,
               double magnitude, std::uint64_t seed, long node_limit,
               const std::string& out_file) {
    auto files = list_instance_files(inst_dir);
    if (!out_file.empty())
        write_manifest(out_file + ".manifest.json", "verify",
                       {{"shifts", shifts_per_instance}, {"tol", tol},
                        {"magnitude", magnitude}, {"seed", seed}},
                       files,
                       std::vector<std::string>(files.size(), camlab::kInstanceSchema),
                       {out_file});
    auto instances = load_instances(files);
    std::mt19937_64 rng(seed);
    long total = 0, passed = 0;
    std::string report;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        for (int r = 0; r < shifts_per_instance; ++r) {
            camlab::ShiftVector s =
                camlab::sample_shift(instances[i], magnitude, rng);
            camlab::PairCheck pc = camlab::check_pair(
                instances[i], s, tol, {0.0, node_limit});
            ++total;
            if (pc.pass()) ++passed;
            report += files[i] + " shift " + std::to_string(r) + ": " +
                      pc.describe() + "\n";
        }
    }
    std::string summary = std::to_string(passed) + "/" + std::to_string(total) +
                          " pass\n";
    report += summary;
    if (!out_file.empty()) write_text(out_file, report);
    std::cout << summary;
    return passed == total ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"camlab: branching-policy laboratory for MILP"};
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("--jobs", jobs, "worker count (deterministic mode forces 1)")
        ->check(CLI::PositiveNumber);

    // gen
    auto* gen = app.add_subcommand("gen", "generate instance files");
    std::string g_family = "setcover", g_out;
    int g_count = 10;
    std::uint64_t g_seed = 0;
    gen->add_option("--family", g_family, "setcover|auction|facility|mis");
    gen->add_option("--count", g_count)->check(CLI::PositiveNumber);
    gen->add_option("--seed", g_seed);
    gen->add_option("--out", g_out, "output directory")->required();

    // collect
    auto* collect = app.add_subcommand("collect", "FSB expert sample collection");
    std::string c_dir, c_out;
    long c_cap = 10;
    std::uint64_t c_seed = 0;
    collect->add_option("--instances", c_dir)->required();
    collect->add_option("--cap", c_cap, "samples per instance")->check(CLI::PositiveNumber);
    collect->add_option("--seed", c_seed);
    collect->add_option("--out", c_out)->required();

    // augment
    auto* augment = app.add_subcommand("augment", "variable-shift augmentation");
    std::string a_in, a_out;
    int a_k = 9;
    double a_mag = 10.0;
    std::uint64_t a_seed = 0;
    augment->add_option("--samples", a_in)->required();
    augment->add_option("--k", a_k, "partners per original")->check(CLI::NonNegativeNumber);
    augment->add_option("--magnitude", a_mag);
    augment->add_option("--seed", a_seed);
    augment->add_option("--out", a_out)->required();

    // train
    auto* train = app.add_subcommand("train", "imitation + contrastive training");
    std::string t_config, t_out, t_history;
    std::vector<std::string> t_samples;
    std::uint64_t t_seed = 0;
    train->add_option("--config", t_config, "key=value config file");
    train->add_option("--samples", t_samples)->required()->expected(-1);
    auto* t_seed_opt = train->add_option("--seed", t_seed, "overrides config seed");
    train->add_option("--out", t_out, "model artifact path")->required();
    train->add_option("--history", t_history, "default: <out>.history.csv");

    // eval
    auto* eval = app.add_subcommand("eval", "policy benchmark + acc@k");
    std::string e_model, e_dir, e_policies = "fsb,learned,random", e_out, e_samples;
    std::string e_level = "desk";
    double e_time = 0.0;
    long e_nodes = 0;
    std::uint64_t e_seed = 0;
    eval->add_option("--model", e_model);
    eval->add_option("--instances", e_dir)->required();
    eval->add_option("--policies", e_policies, "comma list: fsb,mostfrac,random,pseudocost,learned");
    eval->add_option("--samples", e_samples, "held-out samples for acc@k");
    eval->add_option("--time-limit", e_time);
    eval->add_option("--node-limit", e_nodes);
    eval->add_option("--seed", e_seed);
    eval->add_option("--level", e_level);
    eval->add_option("--out", e_out)->required();

    // verify
    auto* verify = app.add_subcommand("verify", "shift-invariance theorem suite");
    std::string v_dir, v_out;
    int v_shifts = 3;
    double v_tol = 1e-6, v_mag = 10.0;
    long v_nodes = 0;
    std::uint64_t v_seed = 0;
    verify->add_option("--instances", v_dir)->required();
    verify->add_option("--shifts", v_shifts, "shifts per instance")->check(CLI::PositiveNumber);
    verify->add_option("--tol", v_tol);
    verify->add_option("--magnitude", v_mag);
    verify->add_option("--node-limit", v_nodes);
    verify->add_option("--seed", v_seed);
    verify->add_option("--out", v_out, "optional report file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen) return cmd_gen(g_family, g_count, g_seed, resolve(g_out));
        if (*collect) return cmd_collect(resolve(c_dir), c_cap, c_seed, resolve(c_out));
        if (*augment) return cmd_augment(resolve(a_in), a_k, a_mag, a_seed, resolve(a_out));
        if (*train) {
            std::vector<std::string> sf;
            for (auto& s : t_samples) sf.push_back(resolve(s));
            return cmd_train(resolve(t_config), sf, t_seed, t_seed_opt->count() > 0,
                             resolve(t_out), t_history.empty() ? "" : resolve(t_history));
        }
        if (*eval)
            return cmd_eval(resolve(e_model), resolve(e_dir), e_policies,
                            resolve(e_out), resolve(e_samples), e_time, e_nodes,
                            e_seed, e_level);
        if (*verify)
            return cmd_verify(resolve(v_dir), v_shifts, v_tol, v_mag, v_seed,
                              v_nodes, resolve(v_out));
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
