// adbn command-line front end. Talks to the library only through adbn.h.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adbn/adbn.h"

namespace {

constexpr int kUsageExit = 64;

struct Failure {
  adbn_status status;
  std::string message;
};

void check(adbn_status s) {
  if (s != ADBN_OK) throw Failure{s, adbn_last_error()};
}

[[noreturn]] void fail(adbn_status s, std::string message) { throw Failure{s, std::move(message)}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<adbn_config, Deleter<adbn_config, adbn_config_free>>;
using Dataset = std::unique_ptr<adbn_dataset, Deleter<adbn_dataset, adbn_dataset_free>>;
using Model = std::unique_ptr<adbn_model, Deleter<adbn_model, adbn_model_free>>;
using Report = std::unique_ptr<adbn_report, Deleter<adbn_report, adbn_report_free>>;

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string seed;
  bool quiet = false;
};

std::string get(const Config& cfg, const char* key) {
  char* raw = nullptr;
  check(adbn_config_get(cfg.get(), key, &raw));
  std::string s = raw;
  adbn_string_free(raw);
  return s;
}

Config load(const Options& o) {
  adbn_config* raw = nullptr;
  if (o.config.empty()) check(adbn_config_default(&raw));
  else check(adbn_config_load(o.config.c_str(), &raw));
  Config cfg(raw);
  for (const std::string& s : o.sets) check(adbn_config_set(cfg.get(), s.c_str()));
  if (!o.seed.empty()) check(adbn_config_set(cfg.get(), ("seed=" + o.seed).c_str()));
  if (!o.out.empty()) check(adbn_config_set(cfg.get(), ("paths.out=\"" + o.out + "\"").c_str()));
  return cfg;
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) fail(ADBN_ERR_IO, path + ": cannot create directory: " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ADBN_ERR_IO, path + ": cannot open for writing");
  out << content;
  if (!out) fail(ADBN_ERR_IO, path + ": write failed");
}

void ensure_parent(const std::string& path) {
  const std::filesystem::path p(path);
  if (!p.has_parent_path()) return;
  std::error_code ec;
  std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) fail(ADBN_ERR_IO, path + ": cannot create directory: " + ec.message());
}

void publish(const Config& cfg, const Report& r, const Options& o) {
  const std::string dir = get(cfg, "paths.out");
  const std::string base = (std::filesystem::path(dir) / adbn_report_name(r.get())).string();
  write_file(base + ".txt", adbn_report_text(r.get()));
  write_file(base + ".json", adbn_report_json(r.get()));
  if (!o.quiet) std::fputs(adbn_report_text(r.get()), stdout);
}

Dataset dataset(const Config& cfg, const char* which) {
  const std::string path = get(cfg, (std::string("paths.") + which).c_str());
  const std::string labels = get(cfg, (std::string("paths.") + which + "_labels").c_str());
  adbn_dataset* raw = nullptr;
  check(adbn_dataset_load(cfg.get(), path.c_str(), labels.c_str(), &raw));
  return Dataset(raw);
}

Model model(const std::string& path) {
  if (path.empty()) fail(ADBN_ERR_CONFIG, "model path is empty");
  adbn_model* raw = nullptr;
  check(adbn_model_load(path.c_str(), &raw));
  return Model(raw);
}

void save(const adbn_model* m, const std::string& path) {
  ensure_parent(path);
  check(adbn_model_save(m, path.c_str()));
}

void cmd_print_config(const Options& o) {
  Config cfg = load(o);
  char* raw = nullptr;
  check(adbn_config_dump(cfg.get(), &raw));
  std::fputs(raw, stdout);
  adbn_string_free(raw);
}

void cmd_synth(const Options& o) {
  Config cfg = load(o);
  adbn_dataset* tr = nullptr;
  adbn_dataset* te = nullptr;
  adbn_report* rep = nullptr;
  check(adbn_synth(cfg.get(), &tr, &te, &rep));
  Dataset train(tr), test(te);
  Report report(rep);
  const std::string train_path = get(cfg, "paths.train");
  const std::string test_path = get(cfg, "paths.test");
  ensure_parent(train_path);
  ensure_parent(test_path);
  check(adbn_dataset_save_csv(train.get(), train_path.c_str()));
  check(adbn_dataset_save_csv(test.get(), test_path.c_str()));
  publish(cfg, report, o);
}

void cmd_pretrain(const Options& o) {
  Config cfg = load(o);
  Dataset train = dataset(cfg, "train");
  adbn_model* m = nullptr;
  adbn_report* rep = nullptr;
  check(adbn_pretrain(cfg.get(), train.get(), &m, &rep));
  Model mdl(m);
  Report report(rep);
  save(mdl.get(), get(cfg, "paths.model"));
  char* events = nullptr;
  check(adbn_model_events(mdl.get(), &events));
  const std::string text = events;
  adbn_string_free(events);
  write_file((std::filesystem::path(get(cfg, "paths.out")) / "events.tsv").string(), text);
  publish(cfg, report, o);
}

void cmd_train(const Options& o) {
  Config cfg = load(o);
  Dataset train = dataset(cfg, "train");
  Model m = model(get(cfg, "paths.model"));
  adbn_report* rep = nullptr;
  check(adbn_train_head(cfg.get(), m.get(), train.get(), &rep));
  Report report(rep);
  save(m.get(), get(cfg, "paths.model"));
  publish(cfg, report, o);
}

void cmd_eval(const Options& o) {
  Config cfg = load(o);
  Dataset test = dataset(cfg, "test");
  Model m = model(get(cfg, "paths.model"));
  adbn_report* rep = nullptr;
  check(adbn_evaluate(cfg.get(), m.get(), test.get(), &rep));
  publish(cfg, Report(rep), o);
}

void cmd_repair(const Options& o) {
  Config cfg = load(o);
  Dataset train = dataset(cfg, "train");
  Dataset test = dataset(cfg, "test");
  Model m = model(get(cfg, "paths.model"));
  adbn_model* child = nullptr;
  adbn_report* rep = nullptr;
  check(adbn_repair(cfg.get(), m.get(), train.get(), test.get(), &child, &rep));
  Model child_model(child);
  Report report(rep);
  save(m.get(), get(cfg, "paths.repaired"));
  const std::string child_path = get(cfg, "paths.child");
  if (child_model && !child_path.empty()) save(child_model.get(), child_path);
  publish(cfg, report, o);
}

void cmd_kl(const Options& o) {
  Config cfg = load(o);
  Dataset test = dataset(cfg, "test");
  Model parent = model(get(cfg, "paths.model"));
  const std::string child_path = get(cfg, "paths.child");
  if (child_path.empty()) fail(ADBN_ERR_CONFIG, "paths.child: required by kl");
  Model child = model(child_path);
  adbn_report* rep = nullptr;
  check(adbn_kl(cfg.get(), parent.get(), child.get(), test.get(), &rep));
  publish(cfg, Report(rep), o);
}

void cmd_trace(const Options& o) {
  Config cfg = load(o);
  Dataset test = dataset(cfg, "test");
  Model m = model(get(cfg, "paths.model"));
  adbn_report* rep = nullptr;
  check(adbn_trace(cfg.get(), m.get(), test.get(), &rep));
  publish(cfg, Report(rep), o);
}

void cmd_rules(const Options& o) {
  Config cfg = load(o);
  Dataset train = dataset(cfg, "train");
  Model m = model(get(cfg, "paths.model"));
  adbn_report* rep = nullptr;
  check(adbn_rules(cfg.get(), m.get(), train.get(), &rep));
  publish(cfg, Report(rep), o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-structure DBN training, repair and rule extraction", "adbn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", adbn_version());
  Options opts;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const Options&);
  };
  const Command commands[] = {
      {"print-config", "Print the effective configuration with every default", cmd_print_config},
      {"synth", "Generate the synthetic confusable-class corpus", cmd_synth},
      {"pretrain", "Greedy adaptive-structure pretraining; writes the model and events",
       cmd_pretrain},
      {"train", "Train the softmax head of a pretrained model", cmd_train},
      {"eval", "Evaluate a model on the test set", cmd_eval},
      {"repair", "Distillation repair on the target classes", cmd_repair},
      {"kl", "Per-sample KL divergence between the model and a child model", cmd_kl},
      {"trace", "Binarized activation paths of test samples", cmd_trace},
      {"rules", "Extract a decision-tree rule list from the model", cmd_rules},
  };

  void (*selected)(const Options&) = nullptr;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", opts.config, "JSON configuration file");
    sub->add_option("--set", opts.sets, "Override a setting, e.g. --set cd.epochs=20")
        ->take_all();
    sub->add_option("-o,--out", opts.out, "Report directory (paths.out)");
    sub->add_option("--seed", opts.seed, "Seed (overrides the configuration)");
    sub->add_flag("-q,--quiet", opts.quiet, "Do not echo the report");
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "adbn: error[usage]: %s\n", e.what());
    return kUsageExit;
  }

  try {
    selected(opts);
  } catch (const Failure& f) {
    std::string msg = f.message;
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::fprintf(stderr, "adbn: error[%s]: %s\n", adbn_status_name(f.status), msg.c_str());
    return static_cast<int>(f.status);
  }
  return 0;
}
