"""Prompt text for the two generation pipelines, kept word for word.

Spacing (including doubled spaces) and the typo "refine you approach" are
reproduced as-is; golden tests pin them.
"""
from __future__ import annotations

from ..rewardlang import reference_card
from ..rewardlang.oracle import source

INTRO = ("In this image, there is an agent that can move throughout the environment.  "
         "There may also be other relevant objects that the agent can interact with.  "
         "The agent is a {agent}.")

INTRO_ROBOTIC = ("In this image, there is an agent that can move throughout the environment.  "
                 "there may also be other relevant objects that the agent can interact with.  "
                 "The agent is a {agent}.")

AGENT_PART = "What is the part of the agent that would most likely interact with objects? Give me only one object."

AGENT_SCRIPT = ("Can you write a script to identify the agent object from the image?  "
                "You should use the shape, edges, and color of the object to identify it as its possible "
                "other objects in the image may have the same color.  This should return the location of "
                "the agent along with {True, False} if it is found.  This script should not require input from me.")

AGENT_OK = ('This is the correct script to identify the agent.  Please remember this script.  '
            'I will refer to it as the "agent_ID_script".')

OBJECTS = ("Can you give a list of the most important objects in this image?  Do not give general objects "
           "like the walls or the grid.  Give me a list of objects and concise names with description.")

GOAL_IMAGE = "I am now going to show you an image of the game when the final goal was completed."

FINAL_GOAL = "What do you think the final goal is?  Give me only one goal."

TASKS = ("Now, from this image, can you infer {n} sequential tasks that the agent must do before it reaches "
         "the final goal.  Give me the list of {n} tasks with descriptions of each task.  This list should be "
         "concise and should not contain general behaviors like: navigate the maze, or avoid walls.  The items "
         "you have identified in the image may help you come up with this list of tasks.   The tasks should be "
         "actionable and concise and must complete the final goal.")

TASK_OBJECT = ("Now for Task {k}, what is the most relevant object or objects in this task to reach or interact "
               "with.  This item should not be the agent.")

OBJECT_SCRIPT = ("Can you write a script to identify this object(s) from the image?  You should use the shape, "
                 "edges and color of the object to identify it as its possible other objects in the image may "
                 "have the same color. You can only use the first image I gave you as input to this script.  "
                 "This script should return the location of the object(s) and {True, False} if it is found.  "
                 "Test by verifying the number of instances of the object found is correct. "
                 "This script should not require input from me.")

OBJECT_OK = ('This is the correct script to identify the {item} item.  Please remember this script.  '
             'I will refer to it as the "{label}".')

CHECK_DESC = ("How would you know if {what} is done?  Please propose one best guess of the check for "
              "completion.  The type of check for completion you use should be implementable using a python "
              "script.  Please describe this check. The script can only use the first image I gave you.  "
              "You are allowed to compare this to the image from the initial frame.")

GOAL_NEW_OBJECTS = "  Can you please tell me first if you must identify any new objects for this task."

STATIONARY = "  You can store the location of objects expected to be stationary."

TASK_EXTRA = ("Are there any other objects that are absolutely essential to interact with or must be identified "
              "to check if this task has been completed.  Only list absolutely essential objects.")

GOAL_EXTRA = ("Are there any objects that you have not identified so far that must be identified to check the "
              "completion of the goal.")

ESSENTIAL = ("Give me the list of essential objects that must be identified to know if the goal has been "
             "completed.  Do not include the agent in this list.  Only give objects that are absolutely essential.")

_IMPLEMENT_HEAD = ("Please implement this technique, you will only have access to a single frame at a time. "
                   "If you would like to access the initial state and compare it to the current state or store "
                   "information from the initial state, this is allowed. Please use the same {scripts} as part "
                   "of your implementation.")
_AGENT_HINT = "  The “agent_ID_script” may also help you."
_IMPLEMENT_BODY = (" You can only use the first image I gave you as input to this script.  This script must return "
                   "{{True, False}}. It may be useful to store the location of expected static objects from the "
                   "initial image.")
_TWO_IMAGES = ("  I will show you two images, the first image is of the initial state and the 2nd image is after "
               "the goal completion.  You must return False on the first image and true on the 2nd. A few useful "
               "techniques: Use the contours to determine if an object is inside of another, don’t approximate "
               "rectangles or radii.  Try to approximate shapes in contours as they may not be exact (or "
               "incomplete). You can do this by finding a convex hull of every contour which would always be "
               "closed and then approximating it down. Checking the shape of objects is useful once you have "
               "identified them by color.")

TASK_IMPLEMENT = _IMPLEMENT_HEAD + _AGENT_HINT + _IMPLEMENT_BODY + " This script should not require input from me."
GOAL_IMPLEMENT = (_IMPLEMENT_HEAD + _AGENT_HINT + _IMPLEMENT_BODY + _TWO_IMAGES
                  + "  This script should not require input from me.")
ROBOTIC_IMPLEMENT = (_IMPLEMENT_HEAD + _IMPLEMENT_BODY + _TWO_IMAGES
                     + " This script should not require input from me.")

REWARD = "Could you also propose a real valued reward function that is incremental if possible?"

FAIL_IDENTIFY = ("Please try again and refine you approach. Please remember to identify objects using edges, "
                 "shape and colour.  Please examine the shape and colour of this object from the image again.")
FAIL_SIMPLIFY = ("Please try again and refine you approach. Please try to simplify your approach by only "
                 "checking color or simple shapes.")
FAIL_PLAIN = "Please try again and refine you approach."


def quote_scripts(labels: list[str], sep: str) -> str:
    return sep.join(f"“{label}”" for label in labels)


def task_implement(labels: list[str]) -> str:
    return TASK_IMPLEMENT.format(scripts=quote_scripts(labels, ", "))


def goal_implement(labels: list[str], robotic: bool = False) -> str:
    template = ROBOTIC_IMPLEMENT if robotic else GOAL_IMPLEMENT
    return template.format(scripts=quote_scripts(labels, " or, "))


def check_desc(what: str, suffix: str = "") -> str:
    return CHECK_DESC.format(what=what) + suffix


def fail_response(failures: int, simplify_after: int, identify: bool) -> str:
    """Retry text after ``failures`` failed attempts on one program slot."""
    if failures >= simplify_after:
        return FAIL_SIMPLIFY
    return FAIL_IDENTIFY if identify else FAIL_PLAIN


def system_message() -> str:
    return "\n".join([
        "You write short programs in a sandboxed language that inspects rendered frames.",
        "Whenever I ask for a script, answer with exactly one program in a fenced code block (```).",
        "",
        "A program is one or more `fn name() { ... }` definitions. The entry function decides the kind:",
        "  identify() returns a detection, check() returns true/false, reward() returns a number.",
        "Statements: let x = e;  store \"key\" = e;  if c { ... } else { ... }  return e;  recall(\"key\") reads.",
        "Expressions: numbers, \"strings\", true/false, + - * / < <= > >= == != and or not, calls.",
        "There are no loops; helper functions take no arguments. Colours: black, grey, red, green,",
        "yellow, blue, brown, orange, purple. Coordinates are pixels, origin top-left, y down.",
        "",
        "Builtins:",
        reference_card(),
        "",
        "Example identifier:",
        "```",
        source("key_identify").strip(),
        "```",
        "",
        "Example completion check:",
        "```",
        source("goal_check").strip(),
        "```",
    ])
