#!/usr/bin/env python3
"""Spreadsheet-style oracle for the dundee_mini fixture.

Counts occupied connector-minutes one minute at a time (no interval
arithmetic), so it shares no logic with the C++ aggregation. Writes
expected.json and expected_availability.csv next to the fixture.
"""
import csv
import json
from datetime import datetime, timedelta
from pathlib import Path

HERE = Path(__file__).resolve().parent
DATA = HERE / "dundee_mini"
FMT = "%Y-%m-%d %H:%M"
FIELDS = ["station_id", "connector_id", "start", "end", "energy_kwh", "lat", "lon", "charger_type"]


def parse_time(text):
    try:
        return datetime.strptime(text.strip(), FMT)
    except ValueError:
        return None


def load_sessions():
    sessions, skipped = [], []
    with open(DATA / "sessions.csv") as f:
        lines = f.read().splitlines()
    header = lines[0].split(",")
    assert header == FIELDS
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(FIELDS):
            skipped.append((lineno, "wrong field count"))
            continue
        r = dict(zip(FIELDS, parts))
        start, end = parse_time(r["start"]), parse_time(r["end"])
        if not r["station_id"]:
            skipped.append((lineno, "missing station id"))
        elif start is None:
            skipped.append((lineno, "unparseable start time"))
        elif end is None:
            skipped.append((lineno, "unparseable end time"))
        elif end < start:
            skipped.append((lineno, "negative duration"))
        elif float(r["energy_kwh"]) < 0:
            skipped.append((lineno, "negative energy"))
        elif abs(float(r["lat"])) > 90 or abs(float(r["lon"])) > 180:
            skipped.append((lineno, "invalid coordinates"))
        elif r["charger_type"] not in ("slow", "fast", "rapid"):
            skipped.append((lineno, "unknown charger type"))
        else:
            sessions.append((r["station_id"], start, end, r["charger_type"]))
    return sessions, skipped


def weather_label(text):
    t = text.strip().lower()
    rain = "rain" in t or "shower" in t
    if ("heavy" in t and rain) or "thunder" in t or "storm" in t:
        return 5
    if rain:
        return 4
    if any(k in t for k in ("fog", "mist", "haze")):
        return 3
    if "cloud" in t or "overcast" in t:
        return 2
    if any(k in t for k in ("sun", "clear", "fair")):
        return 1
    return 0


def load_weather():
    with open(DATA / "weather.csv") as f:
        rows = [(parse_time(r["timestamp"]), r["description"]) for r in csv.DictReader(f)]
    rows.sort(key=lambda r: r[0])
    first = next(weather_label(d) for _, d in rows if weather_label(d))
    out, previous = [], 0
    for t, d in rows:
        label = weather_label(d) or previous or first
        out.append((t, label))
        previous = label
    return out


def main():
    sessions, skipped = load_sessions()
    weather = load_weather()
    with open(DATA / "connectors.csv") as f:
        connectors = {row["station_id"]: int(row["connectors"]) for row in csv.DictReader(f)}
    stations = list(connectors)

    lo = min(s[1] for s in sessions)
    hi = max(s[2] for s in sessions)
    origin = lo.replace(minute=lo.minute - lo.minute % 30)
    steps = 0
    while origin + timedelta(minutes=30 * steps) < hi or steps == 0:
        steps += 1

    busy = {sid: [0] * (steps * 30) for sid in stations}
    for sid, start, end, _ in sessions:
        m = int((start - origin).total_seconds() // 60)
        stop = int((end - origin).total_seconds() // 60)
        for minute in range(m, stop):
            busy[sid][minute] += 1

    clamps = 0
    table = []
    for t in range(steps):
        row = [(origin + timedelta(minutes=30 * t)).strftime(FMT)]
        for sid in stations:
            used = sum(busy[sid][30 * t:30 * t + 30])
            x = 1.0 - used / (30.0 * connectors[sid])
            if x < 0:
                x = 0.0
                clamps += 1
            row.append(repr(x))
        table.append(row)

    with open(HERE / "expected_weather.csv", "w") as f:
        f.write("timestamp,beta\n")
        for t in range(steps):
            now = origin + timedelta(minutes=30 * t)
            label = [lab for when, lab in weather if when <= now][-1]
            f.write(f"{now.strftime(FMT)},{(label - 1) / 4!r}\n")

    with open(HERE / "expected_availability.csv", "w") as f:
        f.write("timestamp," + ",".join(stations) + "\n")
        for row in table:
            f.write(",".join(row) + "\n")

    types = [s[3] for s in sessions]
    expected = {
        "stations": len(stations),
        "sessions": len(sessions),
        "slow": types.count("slow"),
        "fast": types.count("fast"),
        "rapid": types.count("rapid"),
        "skipped_lines": [line for line, _ in skipped],
        "skipped_reasons": [reason for _, reason in skipped],
        "clamps": clamps,
        "steps": steps,
        "grid_start": origin.strftime(FMT),
    }
    with open(HERE / "expected.json", "w") as f:
        json.dump(expected, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
