// gazescroll: simulation campaigns, session analysis, calibration
// evaluation, the live session service and replay.

#include <CLI11.hpp>
#include <boost/asio/signal_set.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "gazescroll/gazescroll.hpp"
#include "gazescroll/server.hpp"

namespace fs = std::filesystem;
using namespace gazescroll;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

techniques::TechniqueConfig apply_overrides(techniques::TechniqueConfig c, const std::vector<std::string>& sets) {
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
        try {
            techniques::set_config_field(c, kv.substr(0, eq), kv.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (auto errors = techniques::validate_config(c); !errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw UsageError(msg);
    }
    return c;
}

std::vector<Technique> parse_techniques(const std::string& name) {
    if (name == "all") return campaign::gesture_techniques();
    auto t = parse_technique(name);
    if (!t) throw UsageError("unknown technique '" + name + "'");
    return {*t};
}

std::vector<std::string> parse_mobilities(const std::string& name) {
    if (name == "both") return {"sitting", "walking"};
    if (!sim::NoiseModel::preset(name)) throw UsageError("unknown mobility '" + name + "'");
    return {name};
}

io::SessionRecording load(const std::string& path) {
    if (!fs::exists(path)) throw io::IoError(path, "no such file");
    auto result = io::read_file(path);
    if (result.skipped_records > 0) {
        std::cerr << path << ": skipped " << result.skipped_records << " records of unknown kind\n";
    }
    return std::move(result.recording);
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io::IoError(path.string(), "cannot open for writing");
    body(os);
    if (!os.flush()) throw io::IoError(path.string(), "write failed");
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string technique = "all";
    std::string mobility = "both";
    std::size_t seeds = 10;
    std::uint64_t first_seed = 1;
    std::size_t pages = 6;
    std::string latency = "phone";
    std::vector<std::string> sets;
    std::string out_dir;
    std::string report_path;
};

int run_simulate(const SimulateArgs& a) {
    if (a.seeds == 0) throw UsageError("--seeds must be at least 1");
    if (a.pages == 0) throw UsageError("--pages must be at least 1");
    campaign::SessionPlan base;
    base.config = apply_overrides({}, a.sets);
    base.pages = a.pages;
    if (a.latency == "none") base.latency = sim::LatencyModel::none();
    else if (a.latency != "phone") throw UsageError("--latency must be phone or none");

    const auto result =
        campaign::run_campaign(parse_techniques(a.technique), parse_mobilities(a.mobility), a.first_seed, a.seeds, base);
    if (!a.out_dir.empty()) {
        fs::create_directories(a.out_dir);
        for (const auto& rec : result.sessions) {
            const std::string name = std::string(to_string(rec.header.technique)) + "-" + rec.header.mobility +
                                     "-seed" + std::to_string(*rec.header.seed) + ".gzs";
            io::write_file(rec, (fs::path(a.out_dir) / name).string());
        }
        std::cerr << "wrote " << result.sessions.size() << " session files to " << a.out_dir << "\n";
    }
    analytics::write_report(result.report, std::cout);
    if (!a.report_path.empty()) {
        write_text(a.report_path, [&](std::ostream& os) { analytics::write_report(result.report, os); });
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::vector<std::string> files;
    std::string out_dir = ".";
    bool heatmap = false;
    bool scanpath = false;
    bool rtpp = false;
    bool report = false;
    double cell_px = 10.0;
};

int run_analyze(const AnalyzeArgs& a) {
    if (!a.heatmap && !a.scanpath && !a.rtpp && !a.report) {
        throw UsageError("choose at least one of --heatmap, --scanpath, --rtpp, --report");
    }
    fs::create_directories(a.out_dir);
    std::vector<analytics::LabeledSession> labeled;
    for (const std::string& file : a.files) {
        const auto rec = load(file);
        const std::string stem = fs::path(file).stem().string();
        const fs::path base = fs::path(a.out_dir) / stem;
        const ScreenGeometry& g = rec.header.geometry;

        if (a.heatmap) {
            const auto samples = rec.samples();
            const auto h = analytics::heatmap(samples, g, a.cell_px);
            write_text(base.string() + ".heatmap.pgm", [&](std::ostream& os) { analytics::write_pgm(h, os); });
            write_text(base.string() + ".heatmap.grid", [&](std::ostream& os) { analytics::write_grid(h, os); });
        }
        if (a.scanpath) {
            const auto pages = io::samples_by_page(rec);
            for (std::size_t v = 0; v < pages.size(); ++v) {
                const auto fixations =
                    stream::detect_fixations(stream::smooth(pages[v].samples, rec.header.stream), rec.header.stream);
                const auto path = analytics::scanpath(fixations);
                write_text(base.string() + ".page" + std::to_string(pages[v].page) + ".svg",
                           [&](std::ostream& os) { analytics::write_svg(path, g, os); });
            }
        }
        if (a.rtpp) {
            const auto start = rec.start_ms(), end = rec.end_ms();
            if (!start) throw DataError(file + ": session has no records");
            const auto scrolls = rec.scrolls();
            const auto r = analytics::rtpp(*start, scrolls, *end);
            std::cout << file << "\trtpp_s";
            for (double d : r.durations_s) std::cout << '\t' << d;
            std::cout << "\tmean_s\t" << r.mean_s << "\tsd_s\t" << r.sd_s << '\n';
        }
        if (a.report) labeled.push_back(campaign::label(rec));
    }
    if (a.report) {
        const auto rows = analytics::robustness_report(labeled);
        analytics::write_report(rows, std::cout);
        write_text(fs::path(a.out_dir) / "report.tsv", [&](std::ostream& os) { analytics::write_report(rows, os); });
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
    std::string noise = "sitting";
    std::size_t trials = 20;
    std::uint64_t seed = 1;
    std::string calibrator = "polynomial";
};

int run_calibrate_eval(const CalibrateArgs& a) {
    if (a.trials == 0) throw UsageError("--trials must be at least 1");
    double noise_cm = 0.0;
    try {
        noise_cm = campaign::calibration_noise_cm(a.noise);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    calibration::FitOptions opts;
    if (a.calibrator == "kernel") opts.kind = calibration::CalibratorKind::Kernel;
    else if (a.calibrator != "polynomial") throw UsageError("--calibrator must be polynomial or kernel");

    std::printf("trial\traw_cm\tcalibrated_cm\tcalibrator\n");
    double raw = 0.0, cal = 0.0;
    std::size_t improved = 0;
    for (std::size_t i = 0; i < a.trials; ++i) {
        const auto t = campaign::run_calibration_trial(noise_cm, a.seed + i, ScreenGeometry{}, opts);
        std::printf("%zu\t%.4f\t%.4f\t%s\n", i + 1, t.raw_cm, t.calibrated_cm,
                    std::string(calibration::to_string(t.kind)).c_str());
        raw += t.raw_cm;
        cal += t.calibrated_cm;
        improved += t.calibrated_cm <= t.raw_cm;
    }
    const double n = static_cast<double>(a.trials);
    std::printf("mean\t%.4f\t%.4f\t%zu/%zu not worse\n", raw / n, cal / n, improved, a.trials);
    return kOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    std::string host = "127.0.0.1";
    unsigned short port = 8765;
    std::string record_dir;
};

int run_serve(const ServeArgs& a) {
    boost::asio::io_context io;
    service::ServerOptions opt;
    opt.host = a.host;
    opt.port = a.port;
    if (!a.record_dir.empty()) opt.record_dir = a.record_dir;
    service::Server server(io, opt);
    server.start();
    boost::asio::signal_set signals(io, SIGINT, SIGTERM);
    signals.async_wait([&](const boost::system::error_code&, int) {
        server.stop();
        io.stop();
    });
    std::cerr << "listening on " << a.host << ":" << server.port() << " (protocol " << service::kProtocolVersion
              << ")\n";
    io.run();
    return kOk;
}

// ---------------------------------------------------------------------------

struct ReplayArgs {
    std::string file;
    double speed = 0.0;
    std::vector<std::string> sets;
    std::string out;
    bool strict = false;
};

int run_replay(const ReplayArgs& a) {
    if (a.speed < 0.0) throw UsageError("--speed must be >= 0");
    const auto rec = load(a.file);
    io::SessionHeader header = rec.header;
    header.config = apply_overrides(header.config, a.sets);
    const auto rerun = io::rerun(rec, header, a.speed);
    if (!a.out.empty()) io::write_file(rerun, a.out);

    const auto diffs = io::diff_logs(io::event_log(rec), io::event_log(rerun));
    if (diffs.empty()) {
        std::cout << "identical: " << io::event_log(rerun).size() << " event lines\n";
        return kOk;
    }
    std::cout << diffs.size() << " differing event lines\n";
    for (const auto& d : diffs) {
        std::cout << "@" << d.index << "\n- " << d.left.value_or("(none)") << "\n+ " << d.right.value_or("(none)")
                  << "\n";
    }
    return a.strict ? kData : kOk;
}

// ---------------------------------------------------------------------------

struct ImportArgs {
    std::string file;
    std::string out;
    std::string technique = "touch";
    io::ColumnMap map;
    std::string delimiter = ",";
};

int run_import(ImportArgs a) {
    if (a.delimiter.size() != 1) throw UsageError("--delimiter must be one character");
    a.map.delimiter = a.delimiter == "\\t" ? '\t' : a.delimiter[0];
    const auto technique = parse_technique(a.technique);
    if (!technique) throw UsageError("unknown technique '" + a.technique + "'");
    std::ifstream is(a.file, std::ios::binary);
    if (!is) throw io::IoError(a.file, "cannot open for reading");
    io::SessionHeader h;
    h.source = "import";
    h.technique = *technique;
    const auto samples = io::import_samples(is, a.map, h.geometry);
    io::RecordingEngine engine(h);
    for (const auto& s : samples) {
        if (engine.engine().finished()) break;
        engine.push(s);
    }
    io::write_file(engine.recording(), a.out);
    std::cerr << "imported " << samples.size() << " samples into " << a.out << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaze scrolling engine: simulation, analysis, calibration, service and replay"};
    app.set_version_flag("--version", "gazescroll 1.0.0 (protocol " + std::to_string(service::kProtocolVersion) + ")");
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Run a seeded simulation campaign");
    sim->add_option("--technique", sim_args.technique, "eyeswipe, hitbox, movingbar, autoscroll, touch or all");
    sim->add_option("--mobility", sim_args.mobility, "sitting, walking or both");
    sim->add_option("--seeds", sim_args.seeds, "Sessions per technique and mobility");
    sim->add_option("--seed", sim_args.first_seed, "First seed");
    sim->add_option("--pages", sim_args.pages, "Pages per document");
    sim->add_option("--latency", sim_args.latency, "phone or none");
    sim->add_option("--set", sim_args.sets, "Config override key=value")->allow_extra_args(false);
    sim->add_option("--out", sim_args.out_dir, "Directory for session files");
    sim->add_option("--report", sim_args.report_path, "Also write the summary table here");

    AnalyzeArgs an_args;
    auto* an = app.add_subcommand("analyze", "Derive artifacts from session files");
    an->add_option("files", an_args.files, "Session files")->required();
    an->add_option("--out", an_args.out_dir, "Output directory");
    an->add_flag("--heatmap", an_args.heatmap, "Write a graymap and a numeric grid");
    an->add_flag("--scanpath", an_args.scanpath, "Write one SVG scan-path per page visit");
    an->add_flag("--rtpp", an_args.rtpp, "Print reading time per page");
    an->add_flag("--report", an_args.report, "Robustness report over all files");
    an->add_option("--cell", an_args.cell_px, "Heatmap cell size in px");

    CalibrateArgs cal_args;
    auto* cal = app.add_subcommand("calibrate-eval", "Compare raw and calibrated error over trials");
    cal->add_option("--noise", cal_args.noise, "sitting, walking, zero or a mean error in cm");
    cal->add_option("--trials", cal_args.trials, "Number of trials");
    cal->add_option("--seed", cal_args.seed, "First seed");
    cal->add_option("--calibrator", cal_args.calibrator, "polynomial or kernel");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run the session service");
    serve->add_option("--host", serve_args.host, "Listen address");
    serve->add_option("--port", serve_args.port, "Listen port");
    serve->add_option("--record", serve_args.record_dir, "Record every session into this directory");

    ReplayArgs rep_args;
    auto* rep = app.add_subcommand("replay", "Re-run a session and compare its event log");
    rep->add_option("file", rep_args.file, "Session file")->required();
    rep->add_option("--speed", rep_args.speed, "Playback speed factor; 0 runs as fast as possible");
    rep->add_option("--set", rep_args.sets, "Config override key=value");
    rep->add_option("--out", rep_args.out, "Write the regenerated session here");
    rep->add_flag("--strict", rep_args.strict, "Exit with a data error when the logs differ");

    ImportArgs imp_args;
    auto* imp = app.add_subcommand("import", "Convert an external gaze table into a session");
    imp->add_option("file", imp_args.file, "Delimited table")->required();
    imp->add_option("--out", imp_args.out, "Session file to write")->required();
    imp->add_option("--technique", imp_args.technique, "Technique to run over the samples");
    imp->add_option("--t-col", imp_args.map.t_column, "Time column");
    imp->add_option("--x-col", imp_args.map.x_column, "x column");
    imp->add_option("--y-col", imp_args.map.y_column, "y column");
    imp->add_option("--on-screen-col", imp_args.map.on_screen_column, "On-screen flag column");
    imp->add_option("--delimiter", imp_args.delimiter, "Field delimiter");
    imp->add_option("--skip", imp_args.map.skip_rows, "Header rows to skip");
    imp->add_option("--time-scale", imp_args.map.time_scale, "Multiplier to milliseconds");
    imp->add_option("--x-scale", imp_args.map.x_scale, "Multiplier to logical px");
    imp->add_option("--y-scale", imp_args.map.y_scale, "Multiplier to logical px");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*sim) return run_simulate(sim_args);
        if (*an) return run_analyze(an_args);
        if (*cal) return run_calibrate_eval(cal_args);
        if (*serve) return run_serve(serve_args);
        if (*rep) return run_replay(rep_args);
        if (*imp) return run_import(imp_args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const service::PortInUse& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
