#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vecsym/batch.hpp"
#include "vecsym/bench.hpp"
#include "vecsym/codegen.hpp"
#include "vecsym/error.hpp"
#include "vecsym/ocp.hpp"
#include "vecsym/quad.hpp"
#include "vecsym/tape.hpp"

using namespace vecsym;

namespace {

std::string defaults_footer() {
    const QuadParams q;
    const SolverConfig s;
    const RoaOptions roa;
    const BenchOptions bench;
    std::ostringstream os;
    os << "Defaults:\n"
       << "  kernel BLOCK_SIZE            " << kDefaultBlockSize << "\n"
       << "  bench timing                 median of " << bench.repetitions << " repetitions, " << bench.warmup
       << " warm-up calls\n"
       << "  quad m, I, r_arm, g          " << q.m << " kg, " << q.I << " kg m^2, " << q.r_arm << " m, " << q.g
       << " m/s^2\n"
       << "  quad dt                      " << q.dt << " s\n"
       << "  quad u_max                   " << q.u_max << " N per rotor (2x hover thrust)\n"
       << "  quad Q                       diag(10, 10, 10, 1, 1, 1)\n"
       << "  quad R                       diag(1, 1)\n"
       << "  quad LQR doubling iterations " << QuadModel::kLqrIterations << "\n"
       << "  quad T_end                   " << roa.steps << " steps\n"
       << "  quad eps_stab                " << roa.stability_eps << " (Q-weighted norm)\n"
       << "  solver M, M_inner            " << s.iterations << ", " << s.inner_iterations << "\n"
       << "  solver mu0, mu growth        " << s.mu0 << ", " << s.mu_growth << "\n"
       << "  solver Hessian eps           " << s.hessian_regularization << "\n"
       << "  solver pivot floor           " << s.pivot_floor << "\n"
       << "  threads                      $VECSYM_THREADS, else all available\n";
    return os.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open output file: " + path);
    return f;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open input file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            ++col;
            const char* begin = cell.c_str();
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
            if (end == begin || *end != '\0') {
                throw Error(path + ":" + std::to_string(lineno) + ": column " + std::to_string(col) +
                            ": not a number: '" + cell + "'");
            }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void apply_overrides(QuadParams& p, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error("--set expects name=value, got '" + s + "'");
        p.set(s.substr(0, eq), std::stod(s.substr(eq + 1)));
    }
    p.validate();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vecsym: compile symbolic functions to instruction tapes and evaluate them in batches"};
    app.footer(defaults_footer());
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    int threads = 0;
    auto add_threads = [&](CLI::App* sub) {
        sub->add_option("--threads", threads, "worker threads (0 = default)")->envname("VECSYM_THREADS");
    };

    // compile
    std::string tape_path, out_path;
    int block_size = kDefaultBlockSize;
    auto* compile = app.add_subcommand("compile", "emit kernel source for a tape");
    compile->add_option("tape", tape_path, "tape file")->required();
    compile->add_option("-o,--output", out_path, "output file (default: stdout)");
    compile->add_option("--block-size", block_size, "threads per block in the launcher")->check(CLI::PositiveNumber);

    // eval
    std::string input_path;
    std::size_t batch = 1;
    auto* eval = app.add_subcommand("eval", "evaluate a tape on a batch read from CSV");
    eval->add_option("tape", tape_path, "tape file")->required();
    eval->add_option("--input", input_path, "headerless CSV, one element per row, input nonzeros in tape order")
        ->required();
    eval->add_option("--batch", batch, "batch size (a single CSV row is broadcast)")->check(CLI::PositiveNumber);
    eval->add_option("-o,--output", out_path, "output CSV (default: stdout)");
    add_threads(eval);

    // bench
    std::vector<int> sizes = default_bench_sizes();
    std::vector<std::size_t> batches = default_batch_sizes();
    std::string bench_out = "bench.csv";
    BenchOptions bench_opts;
    std::string save_tapes;
    auto* bench = app.add_subcommand("bench", "time serial vs batched evaluation of LDL^T solve tapes");
    bench->add_option("--sizes", sizes, "system sizes n")->delimiter(',');
    bench->add_option("--batches", batches, "batch sizes")->delimiter(',');
    bench->add_option("-o,--output", bench_out, "CSV output");
    bench->add_option("--reps", bench_opts.repetitions, "timed repetitions (median reported)")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", bench_opts.warmup, "untimed warm-up calls")->check(CLI::NonNegativeNumber);
    bench->add_option("--save-tapes", save_tapes, "directory to write the generated tapes to");
    add_threads(bench);

    // quad-roa
    RoaOptions roa_opts;
    std::vector<std::string> sets;
    std::string roa_out = "roa.csv";
    auto* roa = app.add_subcommand("quad-roa", "quadcopter region-of-attraction scan");
    roa->add_option("-o,--output", roa_out, "CSV output");
    roa->add_option("--grid", roa_opts.grid, "grid points per momentum axis")->check(CLI::PositiveNumber);
    roa->add_option("--px-max", roa_opts.momentum_x_max, "linear momentum range [-max, max] (kg m/s)");
    roa->add_option("--pw-max", roa_opts.momentum_omega_max, "angular momentum range [-max, max] (kg m^2/s)");
    roa->add_option("--multiples", roa_opts.hover_multiples, "thrust limits as multiples of hover thrust")
        ->delimiter(',');
    roa->add_option("--steps", roa_opts.steps, "rollout length T_end")->check(CLI::NonNegativeNumber);
    roa->add_option("--eps", roa_opts.stability_eps, "stability threshold on the Q-weighted final norm");
    roa->add_option("--set", sets, "override a parameter, name=value (names: m I r_arm g u_max q_px q_py q_phi "
                                   "q_vx q_vy q_omega r_u1 r_u2 dt)");
    add_threads(roa);

    // quad-sweep
    std::string sweep_param = "q_px";
    std::vector<double> sweep_values{2.0, 5.0, 10.0, 20.0, 40.0};
    std::vector<double> z0_values{1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    int sweep_steps = 500;
    std::string sweep_out = "sweep.csv";
    auto* sweep = app.add_subcommand("quad-sweep", "quadcopter parameter sweep from rest");
    sweep->add_option("-o,--output", sweep_out, "CSV output");
    sweep->add_option("--param", sweep_param, "parameter to vary");
    sweep->add_option("--values", sweep_values, "parameter values")->delimiter(',');
    sweep->add_option("--z0", z0_values, "initial state p_x,p_y,phi,v_x,v_y,omega")->delimiter(',')->expected(6);
    sweep->add_option("--steps", sweep_steps, "rollout length")->check(CLI::NonNegativeNumber);
    sweep->add_option("--set", sets, "override a base parameter, name=value");
    add_threads(sweep);

    if (argc <= 1) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*compile) {
            const InstructionTape tape = load_tape(tape_path);
            const KernelSource k = emit_kernel(tape, block_size);
            if (out_path.empty()) {
                std::cout << k.source_text;
            } else {
                open_out(out_path) << k.source_text;
            }
        } else if (*eval) {
            const InstructionTape tape = load_tape(tape_path);
            const auto rows = read_csv(input_path);
            if (rows.size() != batch && rows.size() != 1) {
                throw Error(input_path + ": " + std::to_string(rows.size()) + " rows for a batch of " +
                            std::to_string(batch));
            }
            std::size_t width = 0;
            for (int i = 0; i < tape.n_in(); ++i) width += static_cast<std::size_t>(tape.nnz_in(i));
            BatchWorkspace ws(tape, batch);
            for (std::size_t e = 0; e < batch; ++e) {
                const auto& row = rows.size() == 1 ? rows[0] : rows[e];
                if (row.size() != width) {
                    throw Error(input_path + ":" + std::to_string(e + 1) + ": expected " + std::to_string(width) +
                                " values, got " + std::to_string(row.size()));
                }
                std::size_t k = 0;
                for (int i = 0; i < tape.n_in(); ++i) {
                    for (double& v : ws.input(i, e)) v = row[k++];
                }
            }
            batch_eval(tape, ws, threads);
            std::ostringstream os;
            for (std::size_t e = 0; e < batch; ++e) {
                bool first = true;
                for (int j = 0; j < tape.n_out(); ++j) {
                    for (double v : ws.output(j, e)) {
                        os << (first ? "" : ",") << fmt(v);
                        first = false;
                    }
                }
                os << '\n';
            }
            if (out_path.empty()) {
                std::cout << os.str();
            } else {
                open_out(out_path) << os.str();
            }
        } else if (*bench) {
            std::vector<BenchCase> cases;
            for (int n : sizes) {
                cases.push_back(gen_ldlt_case(n));
                if (!save_tapes.empty()) save_tape(cases.back().tape, save_tapes + "/ldlt_" + std::to_string(n) + ".tape.json");
            }
            bench_opts.batch_sizes = batches;
            bench_opts.n_threads = threads;
            const auto records = run_benchmark(cases, bench_opts);
            auto f = open_out(bench_out);
            write_bench_csv(f, records);
            write_bench_csv(std::cout, records);
        } else if (*roa) {
            QuadParams base;
            apply_overrides(base, sets);
            roa_opts.n_threads = threads;
            const QuadModel model = QuadModel::build();
            const RoaResult res = roa_scan(model, base, roa_opts);
            auto f = open_out(roa_out);
            write_roa_csv(f, res);
            for (std::size_t k = 0; k < res.masks.size(); ++k) {
                std::cout << "u_max " << res.u_max[k] << ": " << res.stable_count(k) << " of " << res.masks[k].size()
                          << " cells stable\n";
            }
        } else if (*sweep) {
            QuadParams base;
            apply_overrides(base, sets);
            QuadState z0{};
            std::copy(z0_values.begin(), z0_values.end(), z0.begin());
            const QuadModel model = QuadModel::build();
            const auto rows = param_sweep(model, base, {{sweep_param, sweep_values}}, z0, sweep_steps, threads);
            auto f = open_out(sweep_out);
            write_sweep_csv(f, rows);
            std::cout << rows.size() << " rows written to " << sweep_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
