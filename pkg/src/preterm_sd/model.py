"""Three-sector stock-and-flow model of preterm births in a county.

Two population stocks (low allostatic load and vulnerable) exchange people
through financial-shock transitions, education-driven upward mobility, and
crime-driven migration. Tax income funds healthcare, schools, and other
spending; Medicaid share responds to the perceived gap between the actual
and desired preterm birth rate; insurance coverage lowers the vulnerable
group's preterm odds.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .engine import (
    INFORMATION_SMOOTH,
    MATERIAL_DELAY,
    FirstOrderState,
    LookupTable,
    first_order_init,
    pulse,
)

SHOCK_WIDTH_YEARS = 2.0

# Medicaid share of resources as a function of the realized PBR gap.
GAP_PRESSURE_POINTS = (
    (-10.0, 0.101316),
    (-4.0, 0.11),
    (0.168196, 0.17193),
    (2.76758, 0.297807),
    (4.90826, 0.389912),
    (7.43119, 0.439035),
    (10.1835, 0.475877),
    (14.5, 0.482018),
    (15.0765, 0.488158),
)

# U.S. violent crime rate per 100k by year (FBI UCR annual tables).
# The 2001 entry fills a gap in the source listing; it sits between the
# published 2000 and 2002 values.
NATIONAL_CRIME_POINTS = (
    (1995.0, 684.46),
    (1996.0, 636.64),
    (1997.0, 611.0),
    (1998.0, 567.6),
    (1999.0, 523.0),
    (2000.0, 506.5),
    (2001.0, 504.5),
    (2002.0, 494.4),
    (2003.0, 475.8),
    (2004.0, 463.2),
    (2005.0, 469.0),
    (2006.0, 479.3),
    (2007.0, 471.8),
    (2008.0, 458.6),
    (2009.0, 431.9),
    (2010.0, 404.5),
    (2011.0, 387.1),
    (2012.0, 387.8),
    (2013.0, 369.1),
    (2014.0, 361.6),
    (2015.0, 373.7),
    (2016.0, 386.3),
    (2017.0, 382.9),
)

# Yearly out-migration fraction of the LAL group vs. perceived relative crime.
CRIME_PERCEPTION_POINTS = (
    (0.66, -0.015),
    (0.8, -0.01),
    (0.9, -0.005),
    (1.0, 0.0),
    (1.1, 0.005),
    (1.25, 0.01),
    (1.5, 0.015),
    (2.0, 0.015),
)


def _gap_pressure_table() -> LookupTable:
    return LookupTable.from_points(GAP_PRESSURE_POINTS)


def _national_crime_table() -> LookupTable:
    return LookupTable.from_points(NATIONAL_CRIME_POINTS)


def _crime_perception_table() -> LookupTable:
    return LookupTable.from_points(CRIME_PERCEPTION_POINTS)


@dataclass(frozen=True)
class Parameters:
    """Every named constant of the model, at its published value."""

    initial_percent_vul: float = 0.28
    initial_county_pop: float = 1.42262e6
    initial_resources: float = 4e9          # dollars
    initial_insurances: float = 500000.0    # people

    frac_br_lal: float = 0.015              # births /yr
    frac_br_vul: float = 0.015
    frac_dr_lal: float = 0.015              # deaths /yr
    frac_dr_vul: float = 0.015
    frac_becoming_vulnerable: float = 0.4   # /yr while the shock is active
    family_size: float = 2.0
    time_for_education_impact: float = 10.0  # yr
    preterm_rate_lal: float = 0.104
    vul_preterm_odd_ratio: float = 2.03
    medical_care_effect: float = 0.86

    relative_contribution_vul: float = 0.58
    tax_contribution_lal: float = 3500.0    # $/yr/person
    shock_magnitude: float = 0.35
    time_of_shock: float = 2000.0
    frac_resources_other: float = 0.4       # /yr
    avg_insurance_cost: float = 4300.0      # $/person/yr
    federal_match: float = 1.75
    time_to_implement_policies: float = 1.0  # yr
    school_age_percentage: float = 0.32     # /yr
    desired_frac_school_funding: float = 0.65
    local_government_match: float = 2.3
    avg_cost_schooling: float = 13000.0     # $/person

    crime_rate_lal: float = 450.0 / 100000.0  # crimes/person/yr
    relative_crime_vul: float = 4.0
    crime_info_delay: float = 1.0           # yr
    relative_vul_immigration: float = 0.45
    vul_migration_time_delay: float = 1.0   # yr

    desired_pbr: float = 11.2               # percent
    time_to_realize_gap: float = 2.0        # yr

    gap_pressure: LookupTable = field(default_factory=_gap_pressure_table)
    national_crime: LookupTable = field(default_factory=_national_crime_table)
    crime_perception: LookupTable = field(default_factory=_crime_perception_table)

    @property
    def initial_vul_pop(self) -> float:
        return self.initial_percent_vul * self.initial_county_pop

    @property
    def initial_lal_pop(self) -> float:
        return (1.0 - self.initial_percent_vul) * self.initial_county_pop


@dataclass(frozen=True)
class Switches:
    """Behavioral on/off toggles; all active in the published runs."""

    education: int = 1
    medical_interventions: int = 1
    outmigration: int = 1
    immigration: int = 1

    def __post_init__(self):
        for name in ("education", "medical_interventions", "outmigration", "immigration"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"switch {name} must be 0 or 1")


@dataclass(frozen=True)
class ModelState:
    """Complete integrable state: five stocks, four first-order states,
    and the previous step's PBR that feeds the gap perception."""

    lal_pop: float
    vul_pop: float
    resources: float
    insurances: float
    school_funds_status: float
    realized_gap_delay: FirstOrderState
    insured_frac_delay: FirstOrderState
    crime_perception_smooth: FirstOrderState
    vul_immigration_smooth: FirstOrderState
    pbr_prev: float


class ResourceAllocation(NamedTuple):
    healthcare: float
    schools: float
    other: float
    pct_medicaid: float


class InsuranceFlows(NamedTuple):
    desired_resources: float
    adequacy: float
    changes: float
    insured_frac: float
    ratio_input: float | None  # None when vul == 0: hold the delayed ratio


class SchoolFunding(NamedTuple):
    available: float
    desired: float
    adequacy: float
    transition_fraction: float
    upward_mobility: float


class CrimeBlock(NamedTuple):
    community_rate: float
    relative_crime: float
    perception: float
    frac_lal_out: float
    frac_vul_in: float
    vul_in_target: float  # input fed into the immigration smooth


class PopulationFlows(NamedTuple):
    birth_lal: float
    vul_births: float
    lal_death: float
    vul_death: float
    transition_to_vul: float
    net_transition_to_low: float
    net_lal_flow: float
    net_vul_flow: float
    d_lal: float
    d_vul: float


def financial_shock(t: float, p: Parameters) -> float:
    return p.shock_magnitude * pulse(t, p.time_of_shock, SHOCK_WIDTH_YEARS)


def financial_resources(lal: float, vul: float, shock: float, p: Parameters) -> float:
    """Yearly tax income, dented by an active financial shock."""
    return (vul * p.relative_contribution_vul + lal) * p.tax_contribution_lal * (1.0 - shock)


def resource_allocation(resources: float, realized_gap: float, p: Parameters) -> ResourceAllocation:
    pct = p.gap_pressure(realized_gap)
    healthcare = pct * resources
    other = p.frac_resources_other * resources
    schools = (1.0 - pct - p.frac_resources_other) * resources
    return ResourceAllocation(healthcare, schools, other, pct)


def insurance_dynamics(
    vul: float,
    healthcare: float,
    insured_delay: FirstOrderState,
    p: Parameters,
) -> InsuranceFlows:
    desired = vul * p.avg_insurance_cost
    adequacy = healthcare * p.federal_match - desired
    changes = adequacy / p.avg_insurance_cost
    insured_frac = min(max(insured_delay.output, 0.0), 1.0)
    return InsuranceFlows(desired, adequacy, changes, insured_frac, None)


def school_funding(
    lal: float,
    vul: float,
    schools: float,
    school_funds_status: float,
    p: Parameters,
    education_switch: int,
) -> SchoolFunding:
    total = lal + vul
    lal_school_age = p.school_age_percentage * lal
    school_age = p.school_age_percentage * total
    available = schools * p.local_government_match / p.avg_cost_schooling
    desired = p.desired_frac_school_funding * school_age
    adequacy = available - desired
    if school_funds_status > 0.0:
        gate = 1.0
    else:
        gate = max(school_funds_status / lal_school_age, -1.0)
    transition_fraction = p.school_age_percentage * gate * (
        p.desired_frac_school_funding - vul / total
    )
    upward_mobility = (
        transition_fraction * p.family_size / p.time_for_education_impact * education_switch
    )
    return SchoolFunding(available, desired, adequacy, transition_fraction, upward_mobility)


def community_crime_rate(lal: float, vul: float, p: Parameters) -> float:
    """Population-weighted violent crime rate per 100k residents."""
    total = lal + vul
    if not total > 0:
        raise ValueError("community crime rate undefined for empty population")
    return (lal + vul * p.relative_crime_vul) * p.crime_rate_lal / total * 100000.0


def crime_block(
    lal: float,
    vul: float,
    t: float,
    perception_smooth: FirstOrderState,
    immigration_smooth: FirstOrderState,
    p: Parameters,
    s: Switches,
) -> CrimeBlock:
    rate = community_crime_rate(lal, vul, p)
    relative = rate / p.national_crime(t)
    perception = perception_smooth.output
    frac_lal_out = p.crime_perception(perception) * s.outmigration
    frac_vul_in = immigration_smooth.output
    vul_in_target = frac_lal_out * p.relative_vul_immigration * s.immigration
    return CrimeBlock(rate, relative, perception, frac_lal_out, frac_vul_in, vul_in_target)


def population_flows(
    lal: float,
    vul: float,
    shock: float,
    upward_mobility: float,
    frac_lal_out: float,
    frac_vul_in: float,
    p: Parameters,
) -> PopulationFlows:
    birth_lal = p.frac_br_lal * lal
    vul_births = p.frac_br_vul * vul
    lal_death = p.frac_dr_lal * lal
    vul_death = p.frac_dr_vul * vul
    transition_to_vul = shock * p.frac_becoming_vulnerable * lal
    net_transition_to_low = upward_mobility * vul
    net_lal_flow = frac_lal_out * lal
    net_vul_flow = frac_vul_in * vul
    d_lal = birth_lal + net_transition_to_low - lal_death - net_lal_flow - transition_to_vul
    d_vul = net_vul_flow + transition_to_vul + vul_births - net_transition_to_low - vul_death
    return PopulationFlows(
        birth_lal,
        vul_births,
        lal_death,
        vul_death,
        transition_to_vul,
        net_transition_to_low,
        net_lal_flow,
        net_vul_flow,
        d_lal,
        d_vul,
    )


def preterm_block(
    birth_lal: float,
    vul_births: float,
    insured_frac: float,
    p: Parameters,
    medical_switch: int,
) -> tuple[float, float]:
    """Vulnerable odds ratio under current coverage, and the resulting PBR."""
    vor = (1 - medical_switch) * p.vul_preterm_odd_ratio + medical_switch * (
        p.vul_preterm_odd_ratio
        * (p.medical_care_effect * insured_frac + (1.0 - insured_frac))
    )
    total_births = birth_lal + vul_births
    if not total_births > 0:
        raise ValueError("PBR undefined with zero total births")
    preterm = (vor * vul_births + birth_lal) * p.preterm_rate_lal
    pbr = preterm / total_births * 100.0
    return vor, pbr


class PretermModel:
    """Bundles parameters and switches into a step function for the engine."""

    warn_nonnegative = ("resources", "insurances")

    def __init__(self, params: Parameters | None = None, switches: Switches | None = None):
        self.params = params or Parameters()
        self.switches = switches or Switches()

    def initial_state(self, start_time: float = 1995.0) -> ModelState:
        p, s = self.params, self.switches
        lal0 = p.initial_lal_pop
        vul0 = p.initial_vul_pop
        # Smooths start at their initial inputs; delays at their published
        # initial outputs (realized gap 3, insured fraction 0.5).
        relative0 = community_crime_rate(lal0, vul0, p) / p.national_crime(start_time)
        perception = first_order_init(INFORMATION_SMOOTH, relative0, p.crime_info_delay)
        frac_out0 = p.crime_perception(perception.output) * s.outmigration
        immigration = first_order_init(
            INFORMATION_SMOOTH,
            frac_out0 * p.relative_vul_immigration * s.immigration,
            p.vul_migration_time_delay,
        )
        realized_gap = first_order_init(MATERIAL_DELAY, 3.0, p.time_to_realize_gap)
        insured = first_order_init(MATERIAL_DELAY, 0.5, p.time_to_implement_policies)
        return ModelState(
            lal_pop=lal0,
            vul_pop=vul0,
            resources=p.initial_resources,
            insurances=p.initial_insurances,
            school_funds_status=0.0,
            realized_gap_delay=realized_gap,
            insured_frac_delay=insured,
            crime_perception_smooth=perception,
            vul_immigration_smooth=immigration,
            pbr_prev=p.desired_pbr + 3.0,
        )

    def step(self, state: ModelState, t: float, dt: float) -> tuple[ModelState, dict[str, float]]:
        p, sw = self.params, self.switches
        lal, vul = state.lal_pop, state.vul_pop

        shock = financial_shock(t, p)
        crime = crime_block(
            lal, vul, t, state.crime_perception_smooth, state.vul_immigration_smooth, p, sw
        )
        income = financial_resources(lal, vul, shock, p)
        gap = state.pbr_prev - p.desired_pbr
        realized_gap = state.realized_gap_delay.output
        alloc = resource_allocation(state.resources, realized_gap, p)
        ins = insurance_dynamics(vul, alloc.healthcare, state.insured_frac_delay, p)
        school = school_funding(
            lal, vul, alloc.schools, state.school_funds_status, p, sw.education
        )
        pop = population_flows(
            lal, vul, shock, school.upward_mobility, crime.frac_lal_out, crime.frac_vul_in, p
        )
        vor, pbr = preterm_block(
            pop.birth_lal, pop.vul_births, ins.insured_frac, p, sw.medical_interventions
        )

        d_resources = income - alloc.other - alloc.healthcare - alloc.schools
        if vul > 0:
            insured_input = state.insurances / vul
        else:
            insured_input = state.insured_frac_delay.output  # hold last ratio
        next_state = ModelState(
            lal_pop=lal + dt * pop.d_lal,
            vul_pop=vul + dt * pop.d_vul,
            resources=state.resources + dt * d_resources,
            insurances=state.insurances + dt * ins.changes,
            school_funds_status=state.school_funds_status + dt * school.adequacy,
            realized_gap_delay=state.realized_gap_delay.step(gap, dt),
            insured_frac_delay=state.insured_frac_delay.step(insured_input, dt),
            crime_perception_smooth=state.crime_perception_smooth.step(crime.relative_crime, dt),
            vul_immigration_smooth=state.vul_immigration_smooth.step(crime.vul_in_target, dt),
            pbr_prev=pbr,
        )

        aux = {
            "pbr": pbr,
            "lal_pop": lal,
            "vul_pop": vul,
            "total_pop": lal + vul,
            "resources": state.resources,
            "insurances": state.insurances,
            "school_funds_status": state.school_funds_status,
            "financial_shock": shock,
            "financial_resources": income,
            "gap": gap,
            "realized_gap": realized_gap,
            "pct_medicaid": alloc.pct_medicaid,
            "healthcare_allocation": alloc.healthcare,
            "schools_allocation": alloc.schools,
            "other_allocation": alloc.other,
            "desired_medical_resources": ins.desired_resources,
            "insurance_adequacy": ins.adequacy,
            "insurance_changes": ins.changes,
            "insured_frac": ins.insured_frac,
            "school_funds_available": school.available,
            "school_funds_desired": school.desired,
            "school_funds_adequacy": school.adequacy,
            "transition_fraction": school.transition_fraction,
            "upward_mobility": school.upward_mobility,
            "community_crime_rate": crime.community_rate,
            "relative_crime": crime.relative_crime,
            "crime_perception": crime.perception,
            "frac_lal_out": crime.frac_lal_out,
            "frac_vul_in": crime.frac_vul_in,
            "net_migration": -crime.frac_lal_out * lal + crime.frac_vul_in * vul,
            "birth_lal": pop.birth_lal,
            "vul_births": pop.vul_births,
            "transition_to_vul": pop.transition_to_vul,
            "net_transition_to_low": pop.net_transition_to_low,
            "vor": vor,
            "desired_pbr": p.desired_pbr,
        }
        return next_state, aux


# --- scenarios -------------------------------------------------------------

_PARAM_NAMES = frozenset(
    f.name for f in dataclasses.fields(Parameters) if f.name not in
    ("gap_pressure", "national_crime", "crime_perception")
)
_SWITCH_NAMES = frozenset(f.name for f in dataclasses.fields(Switches))

# S1 deepens the post-shock vulnerability transfer from the published
# "15 percent" reading to 22 percent; S2 tightens the desired PBR to 9.
SCENARIOS: dict[str, dict[str, float]] = {
    "base": {},
    "s1": {"frac_becoming_vulnerable": 0.4 * 22.0 / 15.0},
    "s2": {"desired_pbr": 9.0},
}


class UnknownScenarioError(ValueError):
    pass


class UnknownParameterError(ValueError):
    pass


def apply_overrides(
    params: Parameters,
    switches: Switches,
    overrides: Mapping[str, float],
) -> tuple[Parameters, Switches]:
    """Apply flat name -> number overrides to parameters or switches."""
    param_updates: dict[str, float] = {}
    switch_updates: dict[str, int] = {}
    for name, value in overrides.items():
        if name in _PARAM_NAMES:
            param_updates[name] = float(value)
        elif name in _SWITCH_NAMES:
            switch_updates[name] = int(value)
        else:
            raise UnknownParameterError(f"unknown parameter: {name!r}")
    if param_updates:
        params = dataclasses.replace(params, **param_updates)
    if switch_updates:
        switches = dataclasses.replace(switches, **switch_updates)
    return params, switches


def build_scenario(
    name: str,
    overrides: Mapping[str, float] | None = None,
    params: Parameters | None = None,
    switches: Switches | None = None,
) -> tuple[Parameters, Switches]:
    """Resolve a named scenario plus custom overrides into concrete inputs."""
    params = params or Parameters()
    switches = switches or Switches()
    if name not in SCENARIOS and name != "custom":
        raise UnknownScenarioError(f"unknown scenario: {name!r}")
    scenario_overrides = SCENARIOS.get(name, {})
    params, switches = apply_overrides(params, switches, scenario_overrides)
    if overrides:
        params, switches = apply_overrides(params, switches, overrides)
    return params, switches


def find_crossing_years(
    times: Sequence[float],
    base: Sequence[float],
    other: Sequence[float],
    persist: int = 2,
) -> list[float]:
    """Saved years where sign(other - base) flips and holds for at least
    `persist` subsequent saves. Single-save wiggles never count and never
    reset the sign in effect."""
    def sign(x: float) -> int:
        return (x > 0) - (x < 0)

    diffs = [o - b for o, b in zip(other, base)]
    crossings: list[float] = []
    current = 0
    for i, d in enumerate(diffs):
        s = sign(d)
        if s == 0 or s == current:
            continue
        if current == 0:
            current = s
            continue
        tail = diffs[i + 1 : i + 1 + persist]
        if len(tail) >= persist and all(sign(x) == s for x in tail):
            current = s
            crossings.append(times[i])
    return crossings


def find_crossing_year(
    times: Sequence[float],
    base: Sequence[float],
    other: Sequence[float],
    persist: int = 2,
) -> float | None:
    """First persistent crossing year, or None."""
    crossings = find_crossing_years(times, base, other, persist)
    return crossings[0] if crossings else None
