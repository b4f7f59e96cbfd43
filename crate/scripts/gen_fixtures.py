#!/usr/bin/env python3
"""Generate the DDL fixtures under fixtures/.

fixtures/small   50 CREATE TABLE statements in 5 sources (plus a sidecar)
fixtures/corpus  1000 CREATE TABLE statements in 20 sources, ~10k columns,
                 a handful of them deliberately malformed

Output is fully determined by the seeds below; rerunning rewrites identical
files. Each directory gets a manifest.json with the statement counts.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"

TYPES = {
    "id": "BIGINT",
    "fk": "BIGINT",
    "name": "VARCHAR(120)",
    "text": "TEXT",
    "code": "VARCHAR(32)",
    "money": "DECIMAL(12,2)",
    "qty": "INTEGER",
    "ratio": "DOUBLE PRECISION",
    "flag": "BOOLEAN",
    "ts": "TIMESTAMP",
    "date": "DATE",
    "email": "VARCHAR(255)",
    "json": "JSON",
}

# (table, [(column, type-key)]) for the hand-written small fixture
SMALL = {
    "shop": [
        ("users", [("id", "id"), ("email", "email"), ("full_name", "name"), ("country", "code"), ("created_at", "ts"), ("is_active", "flag")]),
        ("orders", [("id", "id"), ("user_id", "fk"), ("status", "code"), ("total_amount", "money"), ("currency", "code"), ("created_at", "ts")]),
        ("order_items", [("id", "id"), ("order_id", "fk"), ("product_id", "fk"), ("quantity", "qty"), ("unit_price", "money")]),
        ("products", [("id", "id"), ("sku", "code"), ("title", "name"), ("description", "text"), ("price", "money"), ("category_id", "fk")]),
        ("categories", [("id", "id"), ("name", "name"), ("parent_id", "fk")]),
        ("carts", [("id", "id"), ("user_id", "fk"), ("updated_at", "ts")]),
        ("payments", [("id", "id"), ("order_id", "fk"), ("method", "code"), ("amount", "money"), ("paid_at", "ts")]),
        ("shipments", [("id", "id"), ("order_id", "fk"), ("carrier", "name"), ("tracking_number", "code"), ("shipped_at", "ts")]),
        ("reviews", [("id", "id"), ("product_id", "fk"), ("user_id", "fk"), ("rating", "qty"), ("body", "text")]),
        ("coupons", [("id", "id"), ("code", "code"), ("discount_pct", "ratio"), ("expires_on", "date")]),
    ],
    "hr": [
        ("employees", [("id", "id"), ("first_name", "name"), ("last_name", "name"), ("work_email", "email"), ("hire_date", "date"), ("department_id", "fk")]),
        ("departments", [("id", "id"), ("name", "name"), ("manager_id", "fk")]),
        ("salaries", [("id", "id"), ("employee_id", "fk"), ("amount", "money"), ("effective_from", "date")]),
        ("leave_requests", [("id", "id"), ("employee_id", "fk"), ("start_date", "date"), ("end_date", "date"), ("approved", "flag")]),
        ("job_titles", [("id", "id"), ("title", "name"), ("grade", "code")]),
        ("performance_reviews", [("id", "id"), ("employee_id", "fk"), ("score", "ratio"), ("review_date", "date")]),
        ("trainings", [("id", "id"), ("course_name", "name"), ("hours", "qty")]),
        ("training_enrollments", [("id", "id"), ("training_id", "fk"), ("employee_id", "fk"), ("completed", "flag")]),
        ("offices", [("id", "id"), ("city", "name"), ("country", "code"), ("capacity", "qty")]),
        ("payroll_runs", [("id", "id"), ("period_start", "date"), ("period_end", "date"), ("total_gross", "money")]),
    ],
    "finance": [
        ("accounts", [("id", "id"), ("account_number", "code"), ("holder_name", "name"), ("balance", "money"), ("opened_on", "date")]),
        ("transactions", [("id", "id"), ("account_id", "fk"), ("amount", "money"), ("posted_at", "ts"), ("memo", "text")]),
        ("invoices", [("id", "id"), ("customer_id", "fk"), ("due_date", "date"), ("amount_due", "money"), ("paid", "flag")]),
        ("customers", [("id", "id"), ("company_name", "name"), ("billing_email", "email"), ("tax_id", "code")]),
        ("ledger_entries", [("id", "id"), ("journal_id", "fk"), ("debit", "money"), ("credit", "money")]),
        ("journals", [("id", "id"), ("name", "name"), ("posted_on", "date")]),
        ("exchange_rates", [("id", "id"), ("base_currency", "code"), ("quote_currency", "code"), ("rate", "ratio"), ("as_of", "date")]),
        ("budgets", [("id", "id"), ("department", "name"), ("fiscal_year", "qty"), ("planned_amount", "money")]),
        ("expenses", [("id", "id"), ("employee_ref", "code"), ("category", "code"), ("amount", "money"), ("submitted_at", "ts")]),
        ("credit_scores", [("id", "id"), ("customer_id", "fk"), ("score", "qty"), ("computed_at", "ts")]),
    ],
    "logistics": [
        ("warehouses", [("id", "id"), ("name", "name"), ("city", "name"), ("capacity_units", "qty")]),
        ("inventory", [("id", "id"), ("warehouse_id", "fk"), ("item_code", "code"), ("on_hand", "qty")]),
        ("vehicles", [("id", "id"), ("plate", "code"), ("model", "name"), ("payload_kg", "ratio")]),
        ("drivers", [("id", "id"), ("full_name", "name"), ("license_no", "code"), ("phone", "code")]),
        ("routes", [("id", "id"), ("origin_city", "name"), ("destination_city", "name"), ("distance_km", "ratio")]),
        ("deliveries", [("id", "id"), ("route_id", "fk"), ("vehicle_id", "fk"), ("driver_id", "fk"), ("delivered_at", "ts")]),
        ("suppliers", [("id", "id"), ("company_name", "name"), ("contact_email", "email"), ("country", "code")]),
        ("purchase_orders", [("id", "id"), ("supplier_id", "fk"), ("ordered_on", "date"), ("total_cost", "money")]),
        ("stock_movements", [("id", "id"), ("inventory_id", "fk"), ("delta", "qty"), ("moved_at", "ts")]),
        ("fuel_logs", [("id", "id"), ("vehicle_id", "fk"), ("liters", "ratio"), ("filled_at", "ts")]),
    ],
    "content": [
        ("articles", [("id", "id"), ("title", "name"), ("body", "text"), ("author_id", "fk"), ("published_at", "ts")]),
        ("authors", [("id", "id"), ("pen_name", "name"), ("bio", "text"), ("contact_email", "email")]),
        ("comments", [("id", "id"), ("article_id", "fk"), ("user_handle", "code"), ("body", "text"), ("posted_at", "ts")]),
        ("tags", [("id", "id"), ("label", "name")]),
        ("article_tags", [("article_id", "fk"), ("tag_id", "fk")]),
        ("page_views", [("id", "id"), ("article_id", "fk"), ("viewed_at", "ts"), ("referrer", "text")]),
        ("newsletters", [("id", "id"), ("subject", "name"), ("sent_at", "ts")]),
        ("subscribers", [("id", "id"), ("email", "email"), ("subscribed_on", "date"), ("confirmed", "flag")]),
        ("media_assets", [("id", "id"), ("file_name", "name"), ("mime_type", "code"), ("size_bytes", "qty")]),
        ("editorial_calendar", [("id", "id"), ("article_id", "fk"), ("planned_for", "date"), ("status", "code")]),
    ],
}

SHOP_META = """\
# column descriptions and task history for the shop source
users.email.description = Primary contact address of the customer
users.email.tasks = churn prediction; newsletter targeting
users.created_at.description = When the customer signed up
orders.user_id.description = Customer who placed the order
orders.total_amount.tasks = revenue forecasting
"""

DOMAINS = {
    "retail": (["customer", "order", "product", "store", "basket", "promotion", "return", "loyalty", "price", "cashier"],
               ["email", "full_name", "phone", "total_amount", "discount", "quantity", "unit_price", "sku", "barcode", "store_code", "visit_count", "tier", "points_balance", "refund_amount"]),
    "banking": (["account", "loan", "card", "transfer", "branch", "atm", "mortgage", "deposit", "statement", "fee"],
                ["iban", "balance", "interest_rate", "principal", "term_months", "card_number", "expiry_date", "branch_code", "fee_amount", "currency", "overdraft_limit", "risk_score"]),
    "health": (["patient", "visit", "diagnosis", "prescription", "lab_result", "physician", "ward", "admission", "allergy", "vaccination"],
               ["date_of_birth", "blood_type", "icd_code", "dosage_mg", "result_value", "reference_range", "bed_number", "admitted_at", "discharged_at", "specialty", "insurance_id", "vaccine_lot"]),
    "education": (["student", "course", "enrollment", "grade", "teacher", "classroom", "exam", "assignment", "semester", "scholarship"],
                  ["student_number", "gpa", "credits", "grade_letter", "room_number", "exam_date", "due_date", "submitted_at", "award_amount", "major", "advisor_name", "attendance_rate"]),
    "travel": (["booking", "flight", "hotel", "passenger", "itinerary", "airport", "seat", "fare", "loyalty_member", "rental_car"],
               ["confirmation_code", "departure_time", "arrival_time", "iata_code", "seat_number", "fare_class", "check_in_date", "check_out_date", "room_type", "nights", "pickup_location", "passport_number"]),
    "telemetry": (["device", "sensor", "reading", "firmware", "alert", "gateway", "heartbeat", "calibration", "location_fix", "battery"],
                  ["serial_number", "temperature_c", "humidity_pct", "voltage", "firmware_version", "severity", "latitude", "longitude", "recorded_at", "signal_strength", "battery_pct", "uptime_seconds"]),
    "marketing": (["campaign", "ad_group", "impression", "click", "conversion", "audience", "email_send", "landing_page", "utm_source", "lead"],
                  ["budget", "cpc", "ctr", "impressions", "clicks", "conversion_value", "segment", "open_rate", "bounce_rate", "utm_medium", "lead_score", "channel"]),
    "gaming": (["player", "match", "inventory_item", "achievement", "guild", "leaderboard", "session", "purchase", "quest", "server"],
               ["gamer_tag", "level", "experience_points", "kills", "deaths", "rank", "rarity", "session_length", "region", "gems_spent", "quest_stage", "ping_ms"]),
    "energy": (["meter", "tariff", "consumption", "outage", "substation", "solar_panel", "invoice", "grid_node", "forecast", "maintenance"],
               ["kwh", "peak_kw", "tariff_code", "outage_minutes", "voltage_level", "panel_output", "billing_period", "node_code", "forecast_kwh", "technician", "next_service_date", "meter_reading"]),
    "realestate": (["property", "listing", "agent", "viewing", "offer", "lease", "tenant", "inspection", "neighborhood", "mortgage_quote"],
                   ["address", "square_meters", "bedrooms", "asking_price", "offer_amount", "lease_start", "lease_end", "monthly_rent", "inspection_date", "zip_code", "agent_license", "year_built"]),
}
COMMON = [("created_at", "ts"), ("updated_at", "ts"), ("status", "code"), ("notes", "text"), ("is_deleted", "flag"), ("external_ref", "code")]
QUALIFIERS = ["", "archive", "daily", "staging", "history", "summary"]


def guess_type(col: str) -> str:
    c = col
    if c.endswith("_id") or c == "id":
        return "fk"
    if c.endswith(("_at", "_time")):
        return "ts"
    if c.endswith(("_date", "_start", "_end")) or c == "date_of_birth":
        return "date"
    if "email" in c:
        return "email"
    if any(w in c for w in ("amount", "price", "balance", "budget", "fee", "rent", "principal", "value")):
        return "money"
    if c.endswith("_c") or any(w in c for w in ("rate", "pct", "score", "ratio", "kwh", "kw", "latitude", "longitude", "voltage", "gpa", "cpc", "ctr")):
        return "ratio"
    if any(w in c for w in ("count", "number", "quantity", "credits", "nights", "level", "kills", "deaths", "bedrooms", "minutes", "seconds", "ms", "points", "impressions", "clicks", "year")):
        return "qty"
    if c.startswith("is_"):
        return "flag"
    if any(w in c for w in ("name", "title", "address", "location", "technician")):
        return "name"
    return "code"


def create_table(name: str, columns, primary: str | None = "id") -> str:
    lines = []
    for col, key in columns:
        decl = f"    {col} {TYPES[key]}"
        if col == primary:
            decl += " PRIMARY KEY"
        lines.append(decl)
    return f"CREATE TABLE {name} (\n" + ",\n".join(lines) + "\n);\n"


def write_small():
    out = ROOT / "small"
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"statements": 0, "tables": 0, "columns": 0, "sources": {}}
    for source, tables in SMALL.items():
        text = f"-- {source} schema\n\n" + "\n".join(
            create_table(t, cols, "id" if any(c == "id" for c, _ in cols) else None) for t, cols in tables
        )
        (out / f"{source}.sql").write_text(text)
        ncols = sum(len(c) for _, c in tables)
        manifest["sources"][source] = {"statements": len(tables), "tables": len(tables), "columns": ncols}
        manifest["statements"] += len(tables)
        manifest["tables"] += len(tables)
        manifest["columns"] += ncols
    (out / "shop.meta").write_text(SHOP_META)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def corpus_source(rng: random.Random, domain: str, index: int):
    entities, columns = DOMAINS[domain]
    names = [f"{e}_{q}" if q else e for q in QUALIFIERS for e in entities]
    rng.shuffle(names)
    statements = []
    for name in names[:50]:
        entity = name.split("_")[0]
        picked = rng.sample(columns, rng.randint(5, 9))
        extra = rng.sample(COMMON, rng.randint(1, 3))
        cols = [("id", "id")] + [(c, guess_type(c)) for c in picked] + extra
        if rng.random() < 0.5:
            other = rng.choice(entities)
            cols.insert(1, (f"{other}_id", "fk"))
        # unique column names only
        seen, unique = set(), []
        for c in cols:
            if c[0] not in seen:
                seen.add(c[0])
                unique.append(c)
        statements.append(("ok", create_table(name, unique), len(unique)))
        del entity
    return statements


MALFORMED = [
    # no table name
    "CREATE TABLE (id INTEGER, label VARCHAR(10));\n",
    # empty body
    "CREATE TABLE broken_empty ();\n",
    # garbage instead of a column list
    "CREATE TABLE broken_garbage AS WHATEVER ;;\n",
    # body never closed; kept last in its file
    "CREATE TABLE broken_unterminated (id INTEGER, label VARCHAR(10)\n",
]


def write_corpus():
    rng = random.Random(20241015)
    out = ROOT / "corpus"
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"statements": 0, "well_formed": 0, "malformed": 0, "columns": 0, "sources": {}}
    domains = sorted(DOMAINS)
    malformed_slots = {3: [0], 7: [1], 11: [2], 15: [0, 1], 19: [3]}
    for i in range(20):
        domain = domains[i % len(domains)]
        name = f"{domain}_{i // len(domains) + 1:02d}"
        statements = corpus_source(rng, domain, i)
        bad = [MALFORMED[k] for k in malformed_slots.get(i, [])]
        # malformed statements replace well-formed ones so the total stays 50
        kept = statements[: 50 - len(bad)]
        body = [s for _, s, _ in kept]
        for b in bad:
            if b.startswith("CREATE TABLE broken_unterminated"):
                body.append(b)
            else:
                body.insert(rng.randrange(len(body) + 1), b)
        (out / f"{name}.sql").write_text(f"-- {domain} warehouse tables\n\n" + "\n".join(body))
        ncols = sum(n for _, _, n in kept)
        manifest["sources"][name] = {"statements": 50, "well_formed": len(kept), "malformed": len(bad), "columns": ncols}
        manifest["statements"] += 50
        manifest["well_formed"] += len(kept)
        manifest["malformed"] += len(bad)
        manifest["columns"] += ncols
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    write_small()
    write_corpus()
