#include "dmot/runlog.hpp"

#include <algorithm>
#include <fstream>

#include "dmot/csv.hpp"
#include "dmot/errors.hpp"

namespace dmot {

namespace {

std::string fmt_i(int64_t v) { return std::to_string(v); }

}  // namespace

int64_t RunLog::frame_count() const {
    int64_t last = -1;
    for (const auto& r : robot_poses) last = std::max(last, r.frame);
    for (const auto& o : objects) last = std::max(last, o.frame);
    return last + 1;
}

void RunLog::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);

    CsvTable meta;
    meta.header = {"key", "value"};
    meta.rows.push_back({"frame_rate_hz", format_double(frame_rate_hz)});
    meta.rows.push_back({"d_match_m", format_double(d_match_m)});
    write_csv(dir / "meta.csv", meta);

    CsvTable gt;
    gt.header = {"frame", "kind", "id", "x", "y", "theta", "est_x", "est_y", "est_theta"};
    for (const auto& r : robot_poses) {
        gt.rows.push_back({fmt_i(r.frame), "robot", fmt_i(r.robot),
                           format_double(r.true_world.x), format_double(r.true_world.y),
                           format_double(r.true_world.theta), format_double(r.est_local.x),
                           format_double(r.est_local.y), format_double(r.est_local.theta)});
    }
    for (const auto& o : objects) {
        gt.rows.push_back({fmt_i(o.frame), "object", fmt_i(o.object), format_double(o.pos.x()),
                           format_double(o.pos.y()), "", "", "", ""});
    }
    std::stable_sort(gt.rows.begin(), gt.rows.end(),
                     [](const auto& a, const auto& b) { return parse_int(a[0]) < parse_int(b[0]); });
    write_csv(dir / "ground_truth.csv", gt);

    CsvTable tr;
    tr.header = {"frame", "robot", "track_robot", "track_seq", "status",
                 "px", "py", "vx", "vy", "trace_p"};
    for (const auto& t : tracks) {
        tr.rows.push_back({fmt_i(t.frame), fmt_i(t.robot), fmt_i(t.id.robot), fmt_i(t.id.seq),
                           fmt_i(t.status), format_double(t.x(0)), format_double(t.x(1)),
                           format_double(t.x(2)), format_double(t.x(3)), format_double(t.trace_p)});
    }
    write_csv(dir / "tracks.csv", tr);

    CsvTable al;
    al.header = {"frame", "robot", "neighbor", "est_x", "est_y", "est_theta",
                 "true_x", "true_y", "true_theta", "event", "pairs",
                 "corr_trans_m", "corr_rot_rad"};
    for (const auto& a : alignments) {
        al.rows.push_back({fmt_i(a.frame), fmt_i(a.robot), fmt_i(a.neighbor),
                           format_double(a.est.x), format_double(a.est.y),
                           format_double(a.est.theta), format_double(a.truth.x),
                           format_double(a.truth.y), format_double(a.truth.theta),
                           fmt_i(static_cast<int>(a.event)), fmt_i(a.pair_count),
                           format_double(a.corr_trans_m), format_double(a.corr_rot_rad)});
    }
    write_csv(dir / "alignments.csv", al);

    CsvTable tm;
    tm.header = {"frame", "robot", "stage", "millis"};
    for (const auto& t : timings) {
        tm.rows.push_back({fmt_i(t.frame), fmt_i(t.robot), t.stage, format_double(t.millis)});
    }
    write_csv(dir / "timings.csv", tm);

    if (!comm_trace.empty()) {
        CsvTable rt;
        rt.header = {"frame", "sender", "recipient", "kind", "bytes"};
        for (const auto& c : comm_trace) {
            rt.rows.push_back({fmt_i(c.frame), fmt_i(c.sender), fmt_i(c.recipient), c.kind,
                               fmt_i(static_cast<int64_t>(c.bytes))});
        }
        write_csv(dir / "rounds.csv", rt);
    }
    if (!map_share_records.empty()) {
        std::ofstream out(dir / "map_shares.log");
        if (!out) throw LogError("cannot open " + (dir / "map_shares.log").string());
        for (const auto& record : map_share_records) out << record;
    }
}

RunLog RunLog::read(const std::filesystem::path& dir) {
    RunLog log;

    const CsvTable meta = read_csv(dir / "meta.csv");
    for (const auto& row : meta.rows) {
        if (row[0] == "frame_rate_hz") log.frame_rate_hz = parse_double(row[1]);
        if (row[0] == "d_match_m") log.d_match_m = parse_double(row[1]);
    }

    {
        const CsvTable gt = read_csv(dir / "ground_truth.csv");
        const int c_frame = gt.column("frame"), c_kind = gt.column("kind"), c_id = gt.column("id");
        const int c_x = gt.column("x"), c_y = gt.column("y"), c_th = gt.column("theta");
        const int c_ex = gt.column("est_x"), c_ey = gt.column("est_y"), c_eth = gt.column("est_theta");
        for (const auto& row : gt.rows) {
            if (row[c_kind] == "robot") {
                RobotPoseRow r;
                r.frame = parse_int(row[c_frame]);
                r.robot = static_cast<int32_t>(parse_int(row[c_id]));
                r.true_world = Pose2(parse_double(row[c_x]), parse_double(row[c_y]),
                                     parse_double(row[c_th]));
                r.est_local = Pose2(parse_double(row[c_ex]), parse_double(row[c_ey]),
                                    parse_double(row[c_eth]));
                log.robot_poses.push_back(r);
            } else if (row[c_kind] == "object") {
                ObjectRow o;
                o.frame = parse_int(row[c_frame]);
                o.object = static_cast<int32_t>(parse_int(row[c_id]));
                o.pos = Point2(parse_double(row[c_x]), parse_double(row[c_y]));
                log.objects.push_back(o);
            } else {
                throw LogError("ground_truth.csv: unknown kind '" + row[c_kind] + "'");
            }
        }
    }

    {
        const CsvTable tr = read_csv(dir / "tracks.csv");
        const int c_frame = tr.column("frame"), c_robot = tr.column("robot");
        const int c_tr = tr.column("track_robot"), c_ts = tr.column("track_seq");
        const int c_st = tr.column("status"), c_px = tr.column("px"), c_py = tr.column("py");
        const int c_vx = tr.column("vx"), c_vy = tr.column("vy"), c_tp = tr.column("trace_p");
        for (const auto& row : tr.rows) {
            TrackRow t;
            t.frame = parse_int(row[c_frame]);
            t.robot = static_cast<int32_t>(parse_int(row[c_robot]));
            t.id.robot = static_cast<int32_t>(parse_int(row[c_tr]));
            t.id.seq = parse_int(row[c_ts]);
            t.status = static_cast<int>(parse_int(row[c_st]));
            t.x << parse_double(row[c_px]), parse_double(row[c_py]), parse_double(row[c_vx]),
                parse_double(row[c_vy]);
            t.trace_p = parse_double(row[c_tp]);
            log.tracks.push_back(t);
        }
    }

    {
        const CsvTable al = read_csv(dir / "alignments.csv");
        const int c_frame = al.column("frame"), c_robot = al.column("robot");
        const int c_nb = al.column("neighbor");
        const int c_ex = al.column("est_x"), c_ey = al.column("est_y"), c_eth = al.column("est_theta");
        const int c_tx = al.column("true_x"), c_ty = al.column("true_y"), c_tth = al.column("true_theta");
        const int c_ev = al.column("event"), c_pc = al.column("pairs");
        const int c_ct = al.column("corr_trans_m"), c_cr = al.column("corr_rot_rad");
        for (const auto& row : al.rows) {
            AlignRow a;
            a.frame = parse_int(row[c_frame]);
            a.robot = static_cast<int32_t>(parse_int(row[c_robot]));
            a.neighbor = static_cast<int32_t>(parse_int(row[c_nb]));
            a.est = Pose2(parse_double(row[c_ex]), parse_double(row[c_ey]),
                          parse_double(row[c_eth]));
            a.truth = Pose2(parse_double(row[c_tx]), parse_double(row[c_ty]),
                            parse_double(row[c_tth]));
            a.event = static_cast<AlignEvent>(parse_int(row[c_ev]));
            a.pair_count = static_cast<int>(parse_int(row[c_pc]));
            a.corr_trans_m = parse_double(row[c_ct]);
            a.corr_rot_rad = parse_double(row[c_cr]);
            log.alignments.push_back(a);
        }
    }

    {
        const CsvTable tm = read_csv(dir / "timings.csv");
        const int c_frame = tm.column("frame"), c_robot = tm.column("robot");
        const int c_stage = tm.column("stage"), c_ms = tm.column("millis");
        for (const auto& row : tm.rows) {
            TimingRow t;
            t.frame = parse_int(row[c_frame]);
            t.robot = static_cast<int32_t>(parse_int(row[c_robot]));
            t.stage = row[c_stage];
            t.millis = parse_double(row[c_ms]);
            log.timings.push_back(t);
        }
    }

    return log;
}

}  // namespace dmot
