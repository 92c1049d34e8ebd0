"""Prompt template registry.

Each template declares its required variables and the response grammar its
replies must follow. Rendering substitutes only declared ``{variable}``
slots, so literal braces elsewhere in a body (JSON examples) are safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MissingVariableError

GRAMMARS = (
    "style_component",
    "verdict_passed",
    "verdict_yes_no",
    "json_systems",
    "json_roadmap",
    "headed_sections",
    "task_list",
    "free_text",
)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    required_vars: tuple[str, ...]
    grammar: str
    heads: tuple[str, ...] = ()
    section_divider: str = ""
    style_marker: str = "STYLE:"
    component_marker: str = "###COMPONENT:"
    has_image: bool = False
    # verdict_passed corrections come back either as STYLE###COMPONENT or raw code
    correction_format: str = "style_component"

    def render(self, variables: dict[str, object]) -> str:
        missing = [v for v in self.required_vars if v not in variables]
        if missing:
            raise MissingVariableError(
                f"template {self.name!r} missing variables: {', '.join(missing)}"
            )

        def sub(match: re.Match) -> str:
            key = match.group(1)
            if key in self.required_vars:
                return str(variables[key])
            return match.group(0)

        return re.sub(r"\{([a-z_0-9]+)\}", sub, self.body)


EVOLUTION_VARIATION_BODY = """Objective: Enhance or modify the provided React code snippet, which includes both its JavaScript/TypeScript component code in js/jsx/ts/tsx format and associated CSS/SCSS/LESS styling. Aim to introduce meaningful changes that vary the original in terms of design, functionality, or structure, while ensuring the variation remains self-contained.

Self-contained Definition: The component must operate independently without external local resources such as additional CSS files, images, or third-party libraries. Styles and functionalities are entirely encapsulated within the provided code.

Guidelines for Generating Variations:

Breadth Directions (Diverse Modifications):

  - Visual Style Changes:
    - Modify color schemes, such as introducing a dark mode.
    - Adjust layout configurations, like grid versus flexbox settings.
    - Introduce transitions or animations for interactive elements.

  - Functional Extensions:
    - Add new functionalities like sorting, filtering, or pagination for data-driven components.
    - Integrate an API call to fetch data instead of static data use.
    - Add or remove components to adjust the overall structure, for example adding a button or a modal or something, any component that is defined in the package imported in the code, or a simple component that can be defined in the same file, in a word, DO NOT import any other package or component from other files to make the code self-contained!

  - Architectural Adjustments:
    - Split a large component into smaller, reusable sub-components.
    - Incorporate a higher-order component or custom hooks for state management or lifecycle methods.
    - Apply context API or Redux for more complex state management across the component tree.
    - Slightly add or remove features or components to adjust the overall structure, for example adding a button or a modal or something, any component that is defined in the package imported in the code, or a simple component that can be defined in the same file, in a word, DO NOT import any other package or component from other files to make the code self-contained!

Depth Directions (Complex Modifications):

  - Advanced State Management:
    - Use React's useReducer for managing complex component state instead of useState.
    - Implement custom state management logic that handles multiple states interdependently.

  - Performance Optimizations:
    - Employ techniques like lazy loading, suspense, or memoization to enhance performance.
    - Optimize conditional rendering to minimize the rendering operations.

  - Accessibility Enhancements:
    - Improve keyboard navigability and focus management within the component.
    - Ensure all interactive elements are accessible and ARIA-compliant, providing appropriate roles and properties.

  - Refactoring for Scalability:
    - Refactor the code to be more modular and maintainable, preparing it for scalability.
    - Ensure the component can handle varying levels of props or data volumes without degradation in performance.

Output Requirement:
  - the output variation must not use the same variation strategy nor similar to the variations listed below
  - the output react code should also be self-contained.
  - do not repeat failed attempts listed below
  - do not generate repeated code
  - the only allowed external resources are images with the same name as the original code, and the images are under the "imgs" folder, and more importantly, if using "import", the path should be "./imgs/<IMAGE_NAME>", if refering the image within the style, the path should be "url(/imgs/<IMAGE_NAME>)", if refering the image within the component code, the path should be "/imgs/<IMAGE_NAME>"
  - the output should only contain the react code and style code in the format "STYLE_VARIATION:<STYLE_VARIATION_CONTENT>
  ###COMPONENT_VARIATION:<COMPONENT_VARIATION_CONTENT>", no other comments or explainations or any other content is allowed in the output.

Variations:
{variations}

Failed attempts:
{failed_attempts}

Original Code Snippet:
{code_snippet}"""

EVOLUTION_SIMILARITY_BODY = """Objective: Determine if the newly generated variation of the React code snippet exhibits updates to previous variations or the original snippet, focusing on less critical changes in terms of updates, breadth, or depth.

Task: Analyze the newly generated React code snippet variation and compare it with previous variations and the original snippet. Evaluate changes in styling, functionality, or structural adjustments.

Criteria for Update Assessment:

- Style Updates: Examine if there are distinctive updates in the choice of colors, fonts, or layout modifications.
- Functional Enhancements: Check for updates in added functionalities, such as simple state changes, event handlers, or conditional rendering elements.
- Architectural Adjustments: Identify any resemblances in the way components are structured or organized, even if the changes are minor.
- Depth of Complexity: Look for similar complexity levels, even if the changes apply to less complex components or features.
- Breadth of Changes: Assess if there are minor correspondences in how various aspects of the snippet have been modified, focusing on subtler enhancements.

Output Requirement:

Respond with a single word: "Yes" or "No". This indicates whether the newly generated variation has distinctive updates in depth, or breadth when compared to any of the previous variations or the original.

Original Code snippet:
{original_code}

Previous Variations:
{previous_variations}

Newly Generated Variation:
{new_variation}"""

WATERFALL_SYSTEM_INFER_BODY = """Task: Given a code snippet, infer the system or application it belongs to. You should provide {infer_num} possible systems or applications that the code snippet could be part of, along with a one-sentence introduction of each system or application. You should use your full creativity and experience to come up with suitable systems or applications.

Output Format:
- List the {infer_num} possible systems or applications that the code snippet could be part of in bullet points.
- Each inferrence should be in large difference to others.
- After each system or application, provide a one-sentence introduction of the system or application.
- Each system or application together with its introduction SHOULD take only one line in the bullet point format.
- DO NOT include any additional commentary, explanation, or code blocks.
- The infered systems or applications can not be similar to the following examples:
{example_systems}

Code Snippet:
{code_snippet}"""

WATERFALL_REQUIREMENTS_BODY = """Task: Given a brief description of a system or application (single-page application). Infer the requirements of the system or application based on the common practices, design principles, and functionalities of similar systems or applications. You should first write a brief overview of the system or application, then list the requirements that often arise from such a system or application. Your expression should be in a clear, concise, and professional tone suitable for technical and stakeholder review.

Instructions and Output Format:
- List the inferred requirements as bullet points in a tone consistent with the product requirements document: detailed, clear, and professional.
- Do not include any additional commentary, explaination, or code blocks, only output the content with the following two parts (no other sections or headers are needed):
  - A brief overview of the system or application.
  - A list of requirements that often arise from such a system or application based on the common practices, design principles, and functionalities of similar systems or applications.
  - You DO NOT need to raise the requirements in the follow perspective: Accessibility, Cross-Platform Compatibility, Security, Documentation and Support, Testing and Quality Assurance.
- The output should be formatted as: System Overview\\n<SYSTEM_OVERVIEW_CONTENT>\\n\\nRequirements\\n<REQUIREMENTS_LIST>

System Description: {system_description}"""

WATERFALL_REQUIREMENTS_ITER_BODY = """Task: Review and make great modifications to the requirements of an existing system or application based on the implementation (including both the component code and the style code) from previous stage, real-world projects, real-life usage, and common industrial practices.

Instructions and Output Format:
- Review Current Requirements: Begin by critically summarizing the existing project from the previous stage, highlight any functionalities, components, or styles that are currently implemented.
- Propose large modifications: Based on the summary, propose modificaitons to improve or modify the system's capabilities, functionalities, or design. Make sure the modifications are aligned with industrial standards and common practices. The modifications includes adding new features, modifying existing ones, or removing redundant or outdated components. The modifications should be large and significant (40 percent at least), not minor or trivial.
- The modificaitons should be formatted as a list of requirements in bullet points in a tone consistent with the product requirements document: detailed, clear, and professional.
- A list of requirements that often arise from such a system or application based on the common practices, design principles, and functionalities of similar systems or applications.
- You DO NOT need to raise the requirements in the follow perspective: Accessibility, Cross-Platform Compatibility, Security, Documentation and Support, Testing and Quality Assurance.
- Do not include any additional commentary, explaination, or code blocks, the output should be formatted as: Current Project Summary\\n<CURRENT_PROJECT_SUMMARY_CONTENT>\\n******\\nProposed Modifications/Requirements\\n<PROPOSED_MODIFICATIONS_LIST>

System description and requirements from previous stage:
{system_description}

Implementation from previous stage:
{code_snippet}"""

WATERFALL_LAYOUT_BODY = """Task: Given a brief description of a system or application (single-page application) and its requirements, infer the layout of the system or application based on the common practices, design principles, and functionalities of similar systems or applications. You should list the layout components, their organization, and the interactions between them. Your expression should be in a clear, concise, and professional tone suitable for technical and stakeholder review.

Instructions and Output Format:
- List the inferred layout components, their organization, and interactions as bullet points in a tone consistent with the product requirements document: detailed, clear, and professional.
- Do not include any additional commentary, explaination, or code blocks, only the list (in bullet points) of layout components, their organization, and interactions based on the common practices, design principles, and functionalities of similar systems or applications.
- Do not wrap the output in any additional sections or headers or any markdown formatting.

System Description:
{system_description}

Requirements:
{requirements}"""

WATERFALL_LAYOUT_ITER_BODY = """Task: Review and make great modifications to the layout of an existing system or application based on the layout description from previous stage, real-world projects, real-life usage, common industrial practices, and the provided requirements.

Instructions and Output Format:
- Modify the provided layout description based on the given requirements, you can add, modify, or remove layout components, their organization, and interactions. Make sure the modifications are aligned with industrial standards and common practices. The modifications should be large and significant (40 percent at least), not minor or trivial.
- The modified layout description should be aligned with the provided requirements.
- Do not include any additional commentary, explaination, or code blocks, only the list (in bullet points) of layout components, their organization, and interactions based on the common practices, design principles, and functionalities of similar systems or applications.
- Do not wrap the output in any additional sections or headers or any markdown formatting.

Layout description from previous stage:
{previous_layout_description}

Requirements:
{requirements}"""

WATERFALL_ARCHITECTURE_BODY = """Task: Given a brief description of a frontend React system or application (single-page application) and its requirements and layout, infer the technical architecture of the system or application based on the common practices, design principles, and functionalities of similar systems or applications. Remember this is a pure frontend system, and it is built using React. You should list the tech stack of the frontend development(which includes the libraries, frameworks (the framework has to be React), and tools used in the development of the system), the technical description of the functionalities, and the interactions between the components.
 Your expression should be in a clear, concise, and professional tone applicable for the engineering team to design and develop the system.

Instructions and Output Format:
- The output should consist of three parts: the tech stack, the technical description of the functionalities, and the interactions between the components.
- the tech stack is the libraries, frameworks (the framework has to be React), and tools used for the frontend development, do not include anything about the backend, or database or whatsoever.
- the tech stack should be primarily choosing the most common and widely used libraries and tools in the React ecosystem.
- the framework has to be React.
- the stack should include as least libraries as possible, only the most essential ones to implement the functionalities and design.
- You DO NOT need to include libraries like testing libraries, formatting libraries, babel, webpack, or any other libraries that are not directly related to the frontend development.
- The output should not contain any code, just the natural language description of the above three parts.
- Do not include any additional commentary, explaination, or code blocks, the three parts in the output should be in three separate paragraphs with headers.
- The output should be formatted as:
  - Tech Stack\\n<TECH_STACK_CONTENT>
  - Functionalities\\n<FUNCTIONALITIES_CONTENT>
  - Interactions\\n<INTERACTIONS_CONTENT>

System Description:
{system_description}

Requirements:
{requirements}

Layout:
{layouts}"""

WATERFALL_ARCHITECTURE_ITER_BODY = """Task: Review and make great modifications to the technical architecture of an existing system or application based on the technical architecture description from the previous stage, real-world projects, real-life usage, common industrial practices, and the provided requirements and description of layout design.

Instructions and Output Format:
- The output should consist of three parts: the tech stack, the technical description of the functionalities, and the interactions between the components.
- the tech stack is the libraries, frameworks (the framework has to be React), and tools used for the frontend development, do not include anything about the backend, or database or whatsoever.
- the tech stack should be primarily choosing the most common and widely used libraries and tools in the React ecosystem.
- the framework has to be React.
- the stack should include as least libraries as possible, only the most essential ones to implement the functionalities and design.
- DO NOT use libraries or dependencies including: "react-i18next", "./redux/actions"
- You DO NOT need to include libraries like testing libraries, formatting libraries, babel, webpack, or any other libraries that are not directly related to the frontend development.
- The output should not contain any code, just the natural language description of the above three parts.
- The modifications should be aligned with the provided requirements and layout design.
- Do not include any additional commentary, explaination, or code blocks, the three parts in the output should be in three separate paragraphs with headers.
- The output should be formatted as:
  - Tech Stack\\n<TECH_STACK_CONTENT>
  - Functionalities\\n<FUNCTIONALITIES_CONTENT>
  - Interactions\\n<INTERACTIONS_CONTENT>

Technical Architecture from previous stage:
{previous_tech_architecture}

Requirements:
{requirements}

Layout:
{layouts}"""

WATERFALL_DEV_PLAN_BODY = """Task: Design a step-by-step development plan for a frontend React single-page application based on the provided description, requirements, layout, and technical architecture. The development plan should focus exclusively on the coding and implementation of components and functionalities, not deployment, testing, or optimization tasks.

Instructions and Output Format:
- List 10 to 15 development tasks in the order they should be coded and completed.
- Each task must focus exclusively on coding-related tasks (e.g., developing components, integrating libraries, adding functionality). Do not include non-coding tasks like environment setup, testing, deployment, or optimization.
- The tasks must be designed for a single-page application and must not include multi-page functionality.
- Each task must specify what to implement, how to implement it, and any specific libraries or tools to use, written in a concise, clear, and professional tone.
- The output must strictly follow the format below:
  - Task 1
  <TASK_1_CONTENT>

  - Task 2
  <TASK_2_CONTENT>

  - Task 3
  <TASK_3_CONTENT>
  ...

Do not include any additional commentary, explanations, or code blocks outside the task descriptions.

Example Output Template:
  - Task 1
  Implement the header component. Use React functional components and include a navigation bar with placeholders for links. Style the component using styled-components.

  - Task 2
  Develop the footer component. Include contact information and social media icons. Use FontAwesome for icons and ensure responsive design using CSS Grid.

System Description:
{system_description}

Requirements:
{requirements}

Layout:
{layouts}

Technical Architecture:
{tech_architecture}"""

WATERFALL_CODE_BODY = """Task: Given an implementation of a frontend React system or application (single-page application) with a brief system introduction, additively update the current implementation according to the given task description. The code snippet should be consistent with the common development practices and React component design principles used in real-world projects. The code snippet should be self-contained and consistent with the previous code snippets in the development plan.

Instructions:
- The code snippet should be additively developed upon the Current Implementation (If there the current implementation is not <EMPTY>, otherwise, you need to implement the task based on the given code, and DO NOT delete any part of the Current Implementation if it can introduce not conflict with the given task description).
- You MUST implement exactly the functionalities, layout, together with any details described in the task description.
- The code snippet must operate independently without any external local resources such as additional local files, images, or data.
- The functionalities are entirely encapsulated within the provided code.
- If the code snippet requires data or any kind of input, it should be hard-coded within the component (if input is required, there should be default values for the input).
- The code snippet should be in JavaScript or TypeScript for the component code, and CSS for the styling.
- The output code snippet should be a complete component that can be rendered in a React application, including the import statements, component definitions, export statements, styling, and any other necessary code like event handlers, state management, or mock data for the component to function.
- DO NOT wrap the output and code blocks in any additional sections or headers or any markdown formatting.
- DO NOT generate repeated code.
- The code snippet must have one single default export component (The most top-level component).
- DO NOT use packages or depencies including: "react-i18next", "./redux/actions"
- The code style must be aligned with the common React development practices in real-world projects, for example using components, hooks, or anything according to your knowledge as an expert frontend engineer.
- The code snippet should not include any comments, explanations, or additional content. ONLY the code snippet in the format "STYLE:<STYLE_CONTENT>###COMPONENT:<COMPONENT_CONTENT>".

System Introduction:
{system_description}

Current Implementation:
{current_implementation}

Task Description:
{next_task_description}"""

WATERFALL_CODE_CHECK_BODY = """Review the given code. Ensure the following requirements are met:

1. Self-Containment
- Ensure that the generated component operates independently without relying on external resources such as files, images, or external data (e.g., API calls). If the component requires any input data, it should be hardcoded (mocked) within the component itself, using default values wherever necessary.
- All dependencies must be included directly in the code (i.e., there should be no missing imports or external files).
2. Code Structure and Format
- The generated code should not include any additional sections, headers, or markdown formatting. It must follow this format:
  "STYLE:<STYLE_CONTENT>###COMPONENT:<COMPONENT_CONTENT>"
- The code should include:
  - A single default export component that is the top-level component.
  - Proper imports, including React and necessary utilities.
  - All necessary event handlers, state management, and any mock data.
  - No additional comments or explanations in the code.
3. Avoid Redundancies
- Ensure that there is no repeated or redundant code. Each function, variable, and component should be used only once unless necessary for the design.

Input code:
{code_snippet}

If the code meets all the requirements, respond with a single word "Passed." If there are any issues or violations, make the necessary corrections and provide the updated code in the format "STYLE:<STYLE_CONTENT>###COMPONENT:<COMPONENT_CONTENT>". NO additional comments or explanations are needed."""

ADDITIVE_SYSTEM_INFER_BODY = """Given a React code snippet that I want to integrate into a larger, real-world, production-grade, single-page frontend system. Your task is to propose exactly {infer_num} distinct, fully-featured production-ready frontend React systems where this code snippet can play a meaningful role. Each system should be self-contained, modular, and entirely client-side with no dependencies on backend APIs or real-time data sources.

Each proposed system must be a real, useful product or tool that could exist in a commercial, industrial, or enterprise context. The system should feel like something that could be released as a standalone product (like a SaaS tool, utility app, or data visualization tool) and not a "demo" project.

Proposal Requirements
1. System Name: Provide a name for the system.
2. System Category/Type: Identify the type of system (e.g., interactive dashboard, design tool, productivity app, data visualization app, etc.).
3. System Purpose and Use Case: Describe the purpose of the system, its primary function, and what real-world problem it solves.
4. How the Provided Code Snippet Fits: Clearly explain how and where the provided React code snippet would be used as a key part of the system (e.g., as a core component, widget, or logic handler).
5. System Complexity: Each system must include at least 3-4 interconnected components or sub-modules (not pages) that logically interact with each other.
6. Core Features: Each system should have at least 5-7 essential production-grade features. Example features include:
  - Data visualization and graphs (e.g., charts, dashboards)
  - Interactive forms and filters (e.g., dynamic search, multi-step form validation)
  - Dynamic UI updates (without real-time data - instead, use hardcoded, local JSON or JavaScript objects as data)
  - Stateful UI logic (e.g., tabs, modals, tooltips, or collapsible views)
  - Interactive elements (e.g., drag-and-drop, sliders, sortable lists, or resizable panels)
  - Responsive design (ensure responsiveness across desktop, tablet, and mobile)

Important Guidelines:
- The systems must be built as self-contained, single-page applications. Avoid multiple pages, page reloads, or navigation logic (like "404 pages" or "about pages").
- The system must feel like a standalone product that could be used by a business or an individual. It should not be a "demo" project.
- Each system should use mocked local data (e.g., hard-coded JSON, JavaScript arrays, or default props) for any data-driven features. No real-time data or backend API calls should be used.
- Each system should have distinct logic, purpose, and design. For example, a "To-Do List" app and a "Task Planner" are too similar.
- The output MUST only contain the proposed systems in the following JSON format (you MUST NOT change the key names or add any additional content):
  [
    {
      "name": "System Name",
      "category": "System Category",
      "purpose": "System Purpose and Use Case",
      "code_snippet_usage": "How the Provided Code Snippet Fits",
      "complexity": "System Complexity",
      "features": "Core Features"
    },
    {
      "name": "System Name",
      "category": "System Category",
      "purpose": "System Purpose and Use Case",
      "code_snippet_usage": "How the Provided Code Snippet Fits",
      "complexity": "System Complexity",
      "features": "Core Features"
    },
    ...
  ]
  NO other comments, explainations, or any content is needed, and do not wrap with markdown.

- The infered systems or applications can not be similar to the following examples:
{example_systems}

Code Snippet:
{code_snippet}"""

ADDITIVE_ROADMAP_BODY = """Given a description of a pure frontend system/application, create a complete, step-by-step development roadmap for building this system from start to finish. The development process should follow an additive approach, meaning each step builds on the previous one, introducing new logic, components, and interactive features. The goal is to create a fully-functional, production-grade, standalone React application.

Development Plan Requirements
1. General Structure
  - The system should be developed over at least 15-20 development steps to ensure sufficient complexity and production-grade features.
  - Each step should be large enough to feel like a deliverable milestone, and there MUST be some changes on the visual outlook as well(for example adding/removing/updating components or updating layouts). Each step should introduce significant system-level features, logic updates, or interactive functionality.
  - Each step must be self-contained and should culminate in a single, large, production-grade, single-file React application. This means that all components, styles, logic, and state must be written in one large self-contained code chunk (no imports from local files).
  - The updated should avoid invisible changes (e.g., only updating comments, minor code formatting, or the components can only be seen if some interactions are made).
  - No external data sources or real-time data can be used. If data is needed, it must be hardcoded in the component logic using JSON objects, JavaScript arrays, or mock data.
  - No file separation is allowed. All components, logic, and functionality must exist within a single large code block (one big self-contained React file).

2. Details for Each Step
  - Step Title: A clear name for the development task (e.g., "Build a Filterable Table", "Create a Dashboard with Sorting and Pagination").
  - Objective: The purpose of this step (e.g., "Enable users to sort the table columns dynamically").
  - Components/Logic Introduced: Specify which new logic, components, or features are introduced in this step.
  - How It Builds on the Previous Step: Explain how this step logically builds on the previous one (e.g., "Now that data is displayed, this step enables interactive filtering").
  - Best Practices: Indicate best practices being followed (e.g., "Use memoization to optimize render performance", "Use DRY principles to avoid repeating logic").

3. Example Development Process (3 steps for illustration)
  - Step 1
    Set Up Initial Layout and Component Structure
    Objective: Create the initial layout and component structure for the dashboard.
    Components/Logic Introduced:
      Create Header, Sidebar, and Main Content Area as self-contained elements in the code.
      Hardcode sample navigation items in the sidebar (like "Home", "Reports", "Settings").
      Create an empty Data Display Area where dynamic components (like charts or tables) will be rendered later.
    How It Builds on the Previous Step: Since this is the first step, it sets the foundation for later steps where logic, interactivity, and dynamic features will be added.
    Best Practices:
      Use reusable functions and self-contained components.
      Use Flexbox or CSS Grid to create a responsive layout.
  - Step 2
    Create a Data Table with Hardcoded Data
    Objective: Create a simple table component that displays hardcoded data.
    Components/Logic Introduced:
      Add a DataTable inside the Main Content Area.
      Use map() to iterate over hardcoded data and render each row dynamically.
      Add simple headers (like "Name", "Age", "Role", "Location").
    How It Builds on the Previous Step: The DataTable is displayed inside the Main Content Area created in Step 1.
    Best Practices:
      Pass data as a variable at the top of the file, not as an external file import.
      Use array map() to generate table rows dynamically.
  - Step 3
    Add Sorting Functionality to the Data Table
    Objective: Allow users to sort table columns by clicking on the headers (e.g., clicking "Age" sorts the table by age).
    Components/Logic Introduced:
      Add sort state to track the column being sorted and the sort order (ascending/descending).
      Modify the table headers so that clicking on them triggers the sort.
    How It Builds on the Previous Step: Builds on the existing DataTable by adding interactivity.
    Best Practices:
      Use React state to track sorting.
      Optimize sorting logic with React.memo.

4. Final Requirements for the Development Plan
  - Self-Contained Single-File Code: The final system, when fully implemented, should exist in a single, large React file. All components, logic, and styles must exist within this file. No imports of local files, CSS files, or additional components are allowed.
  - Hardcoded Data Only: If any data is required for the system, it must be stored directly in the file using hardcoded objects, arrays, or default values.
  - Single-Page Application (SPA): The system must not use any page-based navigation logic. All interactions should take place within the same page.
  - Fully Incremental Steps: The system should evolve naturally as each development task is completed, with each task adding significant logic or interactivity.
  - Complexity and Depth: Ensure the system has sufficient depth and complexity. It should have at least 15-20 development steps to demonstrate meaningful growth and progression.
  - The output MUST only contains the step list in the JSON format (you MUST NOT change the key names or add any additional content):
    [
      {
        "title": "Step Title",
        "objective": "Objective Description",
        "components_logic": "Components/Logic Introduced",
        "builds_on": "How It Builds on the Previous Step",
        "best_practices": "Best Practices Followed"
      },
      {
        "title": "Step Title",
        "objective": "Objective Description",
        "components_logic": "Components/Logic Introduced",
        "builds_on": "How It Builds on the Previous Step",
        "best_practices": "Best Practices Followed"
      },
      ...
    ]
  no titles, headings, comments or any other content is needed, and do not wrap with markdown.

System Description:
{system_description}

Code Snippet:
{code_snippet}"""

ADDITIVE_CODE_BODY = """Task: Given an implementation of a frontend React system or application (single-page application) with a brief system introduction, current development task and current implementation of the system. Additively update the current implementation according to the given task description. The generated code should be consistent with the common development practices and React component design principles used in real-world projects. The generated code should be self-contained. You should also learn the coding style and design patterns from the reference code as well, incorporate the similar implementation if the reference code matches the current task.

Instructions:
- The generated code should be additively developed upon the Current Implementation (you need to implement the task based on the Current Implementation, you MUST NOT start from scratch).
- You MUST implement exactly the functionalities, layout, together with any details described in the task description.
- The generated code must operate independently without any external local resources such as additional local files, images, or data.
- The functionalities are entirely encapsulated within the generated code.
- If the generated code requires data or any kind of input, it should be hard-coded within the component (if input is required, there should be default values for the input).
- The generated code should be in JavaScript or TypeScript for the component code, and CSS for the styling.
- The output generated code should be a complete component that can be rendered in a React application, including the import statements, component definitions, export statements, styling, and any other necessary code like event handlers, state management, or mock data for the component to function.
- DO NOT wrap the output and code blocks in any additional sections or headers or any markdown formatting.
- DO NOT generate repeated code.
- The generated code must have one single default export component (The most top-level component).
- DO NOT use packages or depencies including: "react-i18next", "./redux/actions"
- The code style must be aligned with the common React development practices in real-world projects, for example using components, hooks, or anything according to your knowledge as an expert frontend engineer.
- The style spcification must be implemented with the styled-components and no other CSS, SCSS, or LESS specifications are allowed.
- The generated code should not include any comments, explanations, or additional content. ONLY the generated code.

System Introduction:
{system_description}

Current Implementation:
{current_implementation}

Task Description:
{next_task_description}"""

ADDITIVE_CODE_CHECK_BODY = """Review the given code. Ensure the following requirements are met:

1. Self-Containment
- Ensure that the generated component operates independently without relying on external resources such as files, images, or external data (e.g., API calls). If the component requires any input data, it should be hardcoded (mocked) within the component itself, using default values wherever necessary.
- All dependencies must be included directly in the code (i.e., there should be no missing imports or external files).
2. Code Structure and Format
- The generated code should not include any additional sections, headers, or markdown formatting.
- The code should include:
  - A single default export component that is the top-level component.
  - Proper imports, including React and necessary utilities.
  - All necessary event handlers, state management, and any mock data.
  - No additional comments or explanations in the code.
3. Avoid Redundancies
- Ensure that there is no repeated or redundant code. Each function, variable, and component should be used only once unless necessary for the design.

Input code:
{code_snippet}

If the code meets all the requirements, respond with a single word "Passed." If there are any issues or violations, make the necessary corrections and answer with the updated code ONLY. NO additional comments or explanations are needed."""

LAYOUT_DESCRIPTION_BODY = """Analyze the rendered webpage screenshot together with the React code that produced it. Write a detailed layout description of the component: its structural hierarchy, the spatial alignment of its elements, and the interactions among UI elements (which parts are interactive, what they control, and how static and interactive elements relate).

Instructions:
- Write one continuous free-text description, at least 40 words.
- Describe what is visible and how it is organized; mention interactive behavior evident from the code (clicks, toggles, form submissions).
- Do not include code, markdown formatting, headers, or bullet points.

Component Code:
{component_code}

Style Code:
{style_code}

### Input Image:
{image}"""

COMPONENT_VALIDATION_BODY = """You are validating the output of a lexical React component detector. Given the candidate code below, decide whether it is a genuine React component definition (a function, arrow function, or class that renders UI).

Respond with exactly one of:
- Yes            (it is a component and the detected name is right)
- No             (it is not a component)
- RENAME <Name>  (it is a component but its name should be <Name>)

Detected name: {candidate_name}

Candidate code:
{candidate_code}"""

SEAL_CORRECTION_BODY = """The following React component and style code failed self-containment validation. Fix every violation listed while preserving the component's behavior and appearance as closely as possible.

Violations:
{violations}

Rules the corrected code must satisfy:
- Exactly one default export (the top-level component).
- No imports of local files; the only allowed external resources are images under the "imgs" folder using the paths "./imgs/<IMAGE_NAME>" (import), "url(/imgs/<IMAGE_NAME>)" (style), or "/imgs/<IMAGE_NAME>" (component code).
- DO NOT use packages or dependencies including: "react-i18next", "./redux/actions"
- The code must be lexically balanced and complete.
- Respond ONLY in the format "STYLE:<STYLE_CONTENT>###COMPONENT:<COMPONENT_CONTENT>", no other commentary.

Component Code:
{component_code}

Style Code:
{style_code}"""

MOCK_INPUTS_BODY = """The React component below takes the listed input props. Propose realistic hardcoded default values and placeholder handler functions so the component can render standalone, with no external context.

Respond ONLY with a JSON object mapping each prop name to a JavaScript expression string for its default value (e.g. {"isDarkMode": "false", "onClose": "() => {}"}). No markdown, no commentary.

Props: {prop_names}

Component Code:
{component_code}"""

INSTALL_FIX_BODY = """A React sandbox failed to install its dependencies. Analyze the install log and suggest refined dependency versions or configurations.

Respond ONLY with a JSON object mapping package names to version specs to pin or change (use null to remove a package), e.g. {"styled-components": "5.3.11", "left-pad": null}. No markdown, no commentary.

Declared dependencies:
{dependencies}

Install log:
{install_log}"""

RENDER_FIX_BODY = """A React component failed to compile or render inside a standardized sandbox. Analyze the logs, diagnose the implementation issue, and produce corrected code.

Constraints:
- Keep the component self-contained (one default export, no local file imports except the "imgs" paths, no forbidden packages "react-i18next", "./redux/actions").
- Apply the smallest fix that makes the component render.
- Respond ONLY in the format "STYLE:<STYLE_CONTENT>###COMPONENT:<COMPONENT_CONTENT>".

Component Code:
{component_code}

Style Code:
{style_code}

Error log:
{error_log}"""


TEMPLATES: dict[str, PromptTemplate] = {}


def _register(template: PromptTemplate) -> PromptTemplate:
    assert template.grammar in GRAMMARS, template.grammar
    TEMPLATES[template.name] = template
    return template


_register(PromptTemplate(
    name="evolution_variation",
    body=EVOLUTION_VARIATION_BODY,
    required_vars=("variations", "failed_attempts", "code_snippet"),
    grammar="style_component",
    style_marker="STYLE_VARIATION:",
    component_marker="###COMPONENT_VARIATION:",
))
_register(PromptTemplate(
    name="evolution_similarity_check",
    body=EVOLUTION_SIMILARITY_BODY,
    required_vars=("original_code", "previous_variations", "new_variation"),
    grammar="verdict_yes_no",
))
_register(PromptTemplate(
    name="waterfall_system_infer",
    body=WATERFALL_SYSTEM_INFER_BODY,
    required_vars=("infer_num", "example_systems", "code_snippet"),
    grammar="free_text",
))
_register(PromptTemplate(
    name="waterfall_requirements",
    body=WATERFALL_REQUIREMENTS_BODY,
    required_vars=("system_description",),
    grammar="headed_sections",
    heads=("System Overview", "Requirements"),
))
_register(PromptTemplate(
    name="waterfall_requirements_iter",
    body=WATERFALL_REQUIREMENTS_ITER_BODY,
    required_vars=("system_description", "code_snippet"),
    grammar="headed_sections",
    heads=("Current Project Summary", "Proposed Modifications/Requirements"),
    section_divider="******",
))
_register(PromptTemplate(
    name="waterfall_layout",
    body=WATERFALL_LAYOUT_BODY,
    required_vars=("system_description", "requirements"),
    grammar="free_text",
))
_register(PromptTemplate(
    name="waterfall_layout_iter",
    body=WATERFALL_LAYOUT_ITER_BODY,
    required_vars=("previous_layout_description", "requirements"),
    grammar="free_text",
))
_register(PromptTemplate(
    name="waterfall_architecture",
    body=WATERFALL_ARCHITECTURE_BODY,
    required_vars=("system_description", "requirements", "layouts"),
    grammar="headed_sections",
    heads=("Tech Stack", "Functionalities", "Interactions"),
))
_register(PromptTemplate(
    name="waterfall_architecture_iter",
    body=WATERFALL_ARCHITECTURE_ITER_BODY,
    required_vars=("previous_tech_architecture", "requirements", "layouts"),
    grammar="headed_sections",
    heads=("Tech Stack", "Functionalities", "Interactions"),
))
_register(PromptTemplate(
    name="waterfall_dev_plan",
    body=WATERFALL_DEV_PLAN_BODY,
    required_vars=("system_description", "requirements", "layouts", "tech_architecture"),
    grammar="task_list",
))
_register(PromptTemplate(
    name="waterfall_code",
    body=WATERFALL_CODE_BODY,
    required_vars=("system_description", "current_implementation", "next_task_description"),
    grammar="style_component",
))
_register(PromptTemplate(
    name="waterfall_code_check",
    body=WATERFALL_CODE_CHECK_BODY,
    required_vars=("code_snippet",),
    grammar="verdict_passed",
    correction_format="style_component",
))
_register(PromptTemplate(
    name="additive_system_infer",
    body=ADDITIVE_SYSTEM_INFER_BODY,
    required_vars=("infer_num", "example_systems", "code_snippet"),
    grammar="json_systems",
))
_register(PromptTemplate(
    name="additive_roadmap",
    body=ADDITIVE_ROADMAP_BODY,
    required_vars=("system_description", "code_snippet"),
    grammar="json_roadmap",
))
_register(PromptTemplate(
    name="additive_code",
    body=ADDITIVE_CODE_BODY,
    required_vars=("system_description", "current_implementation", "next_task_description"),
    grammar="free_text",
))
_register(PromptTemplate(
    name="additive_code_check",
    body=ADDITIVE_CODE_CHECK_BODY,
    required_vars=("code_snippet",),
    grammar="verdict_passed",
    correction_format="raw_code",
))
_register(PromptTemplate(
    name="layout_description",
    body=LAYOUT_DESCRIPTION_BODY,
    required_vars=("component_code", "style_code", "image"),
    grammar="free_text",
    has_image=True,
))
_register(PromptTemplate(
    name="component_validation",
    body=COMPONENT_VALIDATION_BODY,
    required_vars=("candidate_name", "candidate_code"),
    grammar="free_text",
))
_register(PromptTemplate(
    name="seal_correction",
    body=SEAL_CORRECTION_BODY,
    required_vars=("violations", "component_code", "style_code"),
    grammar="style_component",
))
_register(PromptTemplate(
    name="mock_inputs",
    body=MOCK_INPUTS_BODY,
    required_vars=("prop_names", "component_code"),
    grammar="free_text",
))
_register(PromptTemplate(
    name="install_fix",
    body=INSTALL_FIX_BODY,
    required_vars=("dependencies", "install_log"),
    grammar="free_text",
))
_register(PromptTemplate(
    name="render_fix",
    body=RENDER_FIX_BODY,
    required_vars=("component_code", "style_code", "error_log"),
    grammar="style_component",
))


def get_template(name: str) -> PromptTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise MissingVariableError(f"no prompt template named {name!r}") from None
