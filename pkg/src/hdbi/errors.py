"""Exception hierarchy.

``DataError`` subclasses mean the inputs are inconsistent and map to CLI
exit code 2; ``ConfigError`` maps to exit code 1.
"""


class HdbiError(Exception):
    pass


class ConfigError(HdbiError):
    pass


class DataError(HdbiError):
    pass


class MissingColumn(DataError):
    def __init__(self, name, source=None):
        self.name = name
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"required column {name!r} missing{where}")


class OverlapConflict(DataError):
    def __init__(self, key, detail=""):
        self.key = key
        super().__init__(f"duplicate observation for {key}{': ' + detail if detail else ''}")


class SpliceConfigError(ConfigError):
    pass


class DuplicateMapping(DataError):
    def __init__(self, item_code):
        self.item_code = item_code
        super().__init__(f"item code {item_code} mapped more than once")


class UnknownGroup(DataError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"unknown food group label {label!r}")


class Unmapped(DataError):
    def __init__(self, item_code):
        self.item_code = item_code
        super().__init__(f"item code {item_code} has no food group; extend the commodity map")


class UnassignedCountry(DataError):
    def __init__(self, country_id):
        self.country_id = country_id
        super().__init__(f"country {country_id!r} has no region in the scheme")


class MissingPopulation(DataError):
    def __init__(self, country_id, year):
        self.country_id = country_id
        self.year = year
        super().__init__(f"no population for {country_id!r} in {year}")


class EmptyBin(DataError):
    def __init__(self, region, decade):
        self.region = region
        self.decade = decade
        super().__init__(f"no observations for {region!r} in the {decade}s")


class MissingDelta(DataError):
    def __init__(self, scenario, unit, group, year):
        self.key = (scenario, unit, group, year)
        super().__init__(f"no multiplier for scenario={scenario} unit={unit} group={group} year={year}")


class InvalidDelta(DataError):
    pass


class MissingMember(DataError):
    def __init__(self, unit, country_id):
        self.unit = unit
        self.country_id = country_id
        super().__init__(f"IMPACT unit {unit!r} member {country_id!r} has no base-year data")
